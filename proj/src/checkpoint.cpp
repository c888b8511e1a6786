#include "a2v/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "a2v/error.hpp"

namespace a2v {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', '2', 'V', 'C', 'K', 'P', 'T', '\0'};

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1, Int64 = 2 };

DType dtype_of(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return DType::Float32;
    case torch::kFloat64: return DType::Float64;
    case torch::kInt64: return DType::Int64;
    default: throw Error(ErrorCode::InvalidArgument, "unsupported tensor dtype in checkpoint");
  }
}

torch::ScalarType scalar_of(DType d) {
  switch (d) {
    case DType::Float32: return torch::kFloat32;
    case DType::Float64: return torch::kFloat64;
    case DType::Int64: return torch::kInt64;
  }
  throw Error(ErrorCode::CorruptArchive, "unknown dtype tag");
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  const char* raw(std::size_t n) {
    need(n);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == limit_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw Error(ErrorCode::CorruptArchive, "archive truncated");
  }
  const std::string& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large archives
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ckpt.version);
  json header = {{"fingerprint", ckpt.fingerprint}, {"config", ckpt.config}, {"state", ckpt.state}};
  const std::string header_text = header.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    const torch::Tensor t = tensor.detach().to(torch::kCPU).contiguous();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype_of(t)));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    out.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
  }
  put<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 4) throw Error(ErrorCode::CorruptArchive, "archive truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::CorruptArchive, "bad magic");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, 4);
  if (crc_of(bytes.data(), body) != stored_crc) {
    throw Error(ErrorCode::CorruptArchive, "checksum mismatch");
  }

  Reader r(bytes, body);
  r.take(sizeof(kMagic));
  Checkpoint ckpt;
  ckpt.version = r.get<std::uint32_t>();
  if (ckpt.version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionUnsupported, "archive version " + std::to_string(ckpt.version));
  }
  const auto header_len = r.get<std::uint32_t>();
  try {
    const json header = json::parse(r.take(header_len));
    ckpt.fingerprint = header.at("fingerprint").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.state = header.at("state");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptArchive, std::string("bad header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.take(name_len);
    const auto dtype = scalar_of(static_cast<DType>(r.get<std::uint8_t>()));
    const auto ndim = r.get<std::uint32_t>();
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = r.get<std::int64_t>();
    torch::Tensor t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    const std::size_t nbytes = t.numel() * t.element_size();
    std::memcpy(t.data_ptr(), r.raw(nbytes), nbytes);
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw Error(ErrorCode::CorruptArchive, "trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {
std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path, const Config* expected,
                           bool allow_mismatch) {
  Checkpoint ckpt = decode_checkpoint(read_file(path));
  if (expected != nullptr && !allow_mismatch) {
    const std::string want = config_fingerprint(*expected);
    if (want != ckpt.fingerprint) {
      throw Error(ErrorCode::FingerprintMismatch,
                  path.string() + " was written with config " + ckpt.fingerprint + ", expected " + want);
    }
  }
  return ckpt;
}

Config checkpoint_config(const Checkpoint& ckpt) { return config_from_json(ckpt.config); }

void export_module(const torch::nn::Module& module, const std::string& prefix, TensorMap& out) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  for (const auto& item : module.named_parameters(true)) {
    out[p + item.key()] = item.value().detach().clone();
  }
  for (const auto& item : module.named_buffers(true)) {
    out[p + item.key()] = item.value().detach().clone();
  }
}

void import_module(torch::nn::Module& module, const std::string& prefix, const TensorMap& in) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  torch::NoGradGuard no_grad;
  auto load_one = [&](const std::string& key, torch::Tensor& dst) {
    auto it = in.find(p + key);
    if (it == in.end()) throw Error(ErrorCode::WeightsShapeMismatch, "missing tensor " + p + key);
    if (it->second.sizes() != dst.sizes()) {
      std::ostringstream msg;
      msg << p << key << " has shape " << it->second.sizes() << ", expected " << dst.sizes();
      throw Error(ErrorCode::WeightsShapeMismatch, msg.str());
    }
    dst.copy_(it->second);
  };
  for (auto& item : module.named_parameters(true)) load_one(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) load_one(item.key(), item.value());
}

TensorMap load_tensor_file(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path)).tensors;
}

std::string tensors_digest(const TensorMap& tensors) {
  std::uint64_t h = fnv1a64("");
  for (const auto& [name, tensor] : tensors) {
    h = fnv1a64(name, h);
    const torch::Tensor t = tensor.detach().contiguous();
    h = fnv1a64(std::string_view(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size()), h);
  }
  return to_hex(h);
}

}  // namespace a2v
