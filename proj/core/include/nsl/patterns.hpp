#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nsl/raster.hpp"

namespace nsl {

// Eight projected-pattern families; six are used for training, kinect_dots
// and random_square are held out for testing.
enum class PatternKind {
  kDotsD415,
  kDotsD435,
  kKinectDots,
  kRandomBinary,
  kRandomSquare,
  kSinCos,
  kAlacarte,
  kAlacarteRoll,
};

const char* to_string(PatternKind kind);
PatternKind pattern_kind_from_string(const std::string& name);

// Commercial dot projectors are proprietary; the dot generators here are
// statistical stand-ins matched to plausible bright-pixel densities.
struct PatternSpec {
  PatternKind kind = PatternKind::kRandomBinary;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  // Kind-specific knobs; unset keys fall back to defaults:
  //   dot_density    fraction of bright pixels for dot kinds
  //                  (d415 0.08, d435 0.10, kinect 0.06)
  //   bernoulli_p    bright probability for random_binary (0.5)
  //   square_min     min square side for random_square (3)
  //   square_max     max square side for random_square (9)
  //   square_coverage target bright fraction for random_square (0.30)
  //   period_x       sincos horizontal period in px (16)
  //   period_y       sincos vertical period in px (16)
  std::map<std::string, double> params;

  void validate() const;
};

struct PatternImage {
  Raster<double> intensities;  // [0, 1]
  int width() const { return intensities.width(); }
  int height() const { return intensities.height(); }
};

// Pure function of the spec: the same spec always yields a bit-identical
// raster regardless of call order or thread.
PatternImage generate_pattern(const PatternSpec& spec);

inline constexpr int kNumPatternKinds = 8;
// Training / testing split of the eight kinds.
extern const PatternKind kTrainPatternKinds[6];
extern const PatternKind kTestPatternKinds[2];

}  // namespace nsl
