#include "a2v/eye.hpp"

#include <cmath>

#include "a2v/error.hpp"

namespace a2v {

namespace {
double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }
}  // namespace

double ear(const EyePoints& eye) {
  const double width = dist(eye[0], eye[3]);
  if (width < 1e-6) throw Error(ErrorCode::DegenerateEye, "eye width below 1e-6");
  return (dist(eye[1], eye[5]) + dist(eye[2], eye[4])) / width;
}

double mean_ear(const EyeLandmarks& eyes) { return 0.5 * (ear(eyes.left) + ear(eyes.right)); }

double blink_loss(double real_ear, double gen_ear) { return std::abs(real_ear - gen_ear); }

}  // namespace a2v
