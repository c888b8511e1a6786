#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "a2v/image.hpp"
#include "a2v/losses.hpp"

namespace a2v {

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE) over all channels; kPsnrInfinite for identical
/// images. Throws ShapeMismatch.
double psnr(const Image& a, const Image& b);

/// Gray-level plane in [0, 255].
struct Gray {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

Gray gray_of(const Image& img);

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5) of
/// the luma planes, C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2. Throws
/// ShapeMismatch and TooSmall.
double ssim(const Image& a, const Image& b);
double ssim(const Gray& a, const Gray& b);

/// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_kernel(int size, double sigma);
/// Separable Gaussian blur with edge clamping.
Gray gaussian_blur(const Gray& g, double sigma);

/// Edge width of the edge pixel at column x of row y: distance between the
/// intensity extrema that bracket it along the row, following the sign of the
/// horizontal gradient.
int edge_width(const Gray& g, int x, int y);

/// No-reference sharpness in [0, 1]: share of edge pixels (Sobel, in 64x64
/// blocks with more than 0.2% edge pixels) whose blur probability
/// 1 - exp(-(w / w_jnb)^3.6) stays at or below 0.63. w_jnb is 5 for block
/// contrast <= 50, else 3. Throws NoEdges.
double cpbd(const Image& img);
double cpbd(const Gray& g);

/// Maps a face image to an identity vector of fixed dimension. `key` names
/// the image ("<side>/<clip>/<frame file>" during evaluation) for embedders
/// backed by precomputed tables.
class IdentityEmbedder {
 public:
  virtual ~IdentityEmbedder() = default;
  virtual std::vector<double> embed(const Image& img, const std::string& key) = 0;
  /// Recorded in reports so numbers from different embedders are not mixed.
  virtual std::string label() const = 0;
};

/// Channel means of every level of the frozen perceptual extractor,
/// concatenated and L2-normalized. Not comparable to face-recognition
/// embeddings.
class ExtractorEmbedder : public IdentityEmbedder {
 public:
  explicit ExtractorEmbedder(FeatureExtractor extractor);
  std::vector<double> embed(const Image& img, const std::string& key) override;
  std::string label() const override { return "perceptual-extractor"; }

 private:
  FeatureExtractor extractor_;
};

/// Precomputed embeddings: one line per image, its key followed by the
/// vector, whitespace separated. Unknown keys throw MissingFile.
class FileEmbedder : public IdentityEmbedder {
 public:
  explicit FileEmbedder(const std::filesystem::path& table);
  std::vector<double> embed(const Image& img, const std::string& key) override;
  std::string label() const override { return "file:" + source_; }

 private:
  std::string source_;
  std::map<std::string, std::vector<double>> table_;
};

inline constexpr double kAcdCosineThreshold = 0.02;
inline constexpr double kAcdEuclideanThreshold = 0.20;

struct AcdResult {
  double cosine = 0.0;
  double euclidean = 0.0;
  bool same_identity = true;
  std::string embedder;
};

bool acd_cosine_passes(double d);
bool acd_euclidean_passes(double d);

/// Mean cosine distance (1 - cos) and Euclidean distance between matched
/// embeddings. Throws LengthMismatch on unequal or empty sequences.
AcdResult acd_from_embeddings(const std::vector<std::vector<double>>& gen,
                              const std::vector<std::vector<double>>& real);
/// Keys default to "generated/<i>" and "reference/<i>" when not given.
AcdResult acd(const std::vector<Image>& gen, const std::vector<Image>& real, IdentityEmbedder& embedder,
              const std::vector<std::string>& gen_keys = {}, const std::vector<std::string>& real_keys = {});

/// Rolling median over `window` frames centered on each index, truncated at
/// the ends (even-sized windows average the two middle values).
std::vector<double> rolling_median(const std::vector<double>& x, int window);

/// Maximal runs with EAR < 0.75 * rolling median (25 frames). Throws TooShort
/// below three frames.
int detect_blinks(const std::vector<double>& ear);

/// Word-level edit distance over the reference length.
double word_error_rate(const std::string& reference, const std::string& hypothesis);

/// Lipreading predictions produced elsewhere: clip_id <TAB> reference <TAB>
/// hypothesis per line.
std::map<std::string, double> read_wer_predictions(const std::filesystem::path& path);

struct ClipMetrics {
  std::string clip_id;
  std::vector<double> ssim;
  std::vector<double> psnr_db;               // may hold kPsnrInfinite
  std::vector<std::optional<double>> cpbd;   // empty where the frame has no edges
  double ssim_mean = 0.0;
  double psnr_mean = 0.0;   // over finite values
  int psnr_excluded = 0;    // identical frames left out of psnr_mean
  double cpbd_mean = 0.0;
  int cpbd_excluded = 0;
  AcdResult acd;
  std::optional<int> blink_count;
  std::optional<double> wer;
};

/// Throws LengthMismatch when the sequences differ in length.
ClipMetrics evaluate_clip(const std::string& clip_id, const std::vector<Image>& generated,
                          const std::vector<Image>& reference, IdentityEmbedder& embedder,
                          const std::vector<std::string>& gen_keys = {},
                          const std::vector<std::string>& real_keys = {});

nlohmann::json to_json(const ClipMetrics& m);

}  // namespace a2v
