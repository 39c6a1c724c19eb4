#pragma once

#include <string>

#include "scopesim/config.hpp"

namespace scopesim {

/// Scene-suite statistics in the units the summary block reports.
struct SuiteStats {
  int scenes = 0;
  int train_scenes = 0;
  int test_scenes = 0;
  double distance_mean = 0.0, distance_std = 0.0;
  double steps_mean = 0.0, steps_std = 0.0;
  double points_1e5_mean = 0.0, points_1e5_std = 0.0;
};

/// Generates `count` scenes with demonstrations (demos_per_train_scene for
/// the train split, one for the test split) and writes scenes/, trajs/,
/// train.manifest, test.manifest, and config.cfg under out_dir.
SuiteStats write_scene_suite(const std::string& out_dir, const RunConfig& config,
                             int count, int train_count);

struct AugmentAudit {
  std::size_t demonstrations = 0;
  std::size_t augmented = 0;
  double endpoint_dev_mean = 0.0, endpoint_dev_std = 0.0, endpoint_dev_max = 0.0;
  double shape_cos_mean = 0.0, shape_cos_std = 0.0, shape_cos_min = 1.0;
};

/// Preprocesses every env entry of `manifest` (smooth + equal-distance
/// resample), expands it with SPTA at config.spta.rate, and writes the
/// trajectories plus augmented.manifest under out_dir.
AugmentAudit write_augmented_suite(const std::string& out_dir, const Manifest& manifest,
                                   const RunConfig& config);

}  // namespace scopesim
