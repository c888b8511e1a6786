#pragma once

#include <array>

namespace a2v {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// p1..p6 of one eye: corners p1/p4, upper lid p2/p3, lower lid p6/p5.
using EyePoints = std::array<Point2, 6>;

struct EyeLandmarks {
  EyePoints left;
  EyePoints right;
};

/// (|p2 - p6| + |p3 - p5|) / |p1 - p4|. Throws DegenerateEye when the eye
/// width is below 1e-6.
double ear(const EyePoints& eye);
/// Mean EAR of both eyes.
double mean_ear(const EyeLandmarks& eyes);

/// |m_r - m_g|.
double blink_loss(double real_ear, double gen_ear);

}  // namespace a2v
