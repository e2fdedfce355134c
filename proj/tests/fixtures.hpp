#ifndef HIERENT_TESTS_FIXTURES_HPP_
#define HIERENT_TESTS_FIXTURES_HPP_

#include <vector>

#include "hierent/hierarchy_data.hpp"

namespace hierent::fixtures {

// img1: car (b1) containing a wheel (b2), plus a tree (b3) off to the side.
// img2: one wheel (b4).
inline std::vector<BoundingBox> two_image_boxes() {
  return {
      {"img1", "img1_b1", {0.1, 0.1, 0.9, 0.9}, "car", false},
      {"img1", "img1_b2", {0.2, 0.6, 0.4, 0.85}, "wheel", false},
      {"img1", "img1_b3", {0.92, 0.0, 1.0, 0.5}, "tree", false},
      {"img2", "img2_b4", {0.3, 0.3, 0.5, 0.5}, "wheel", false},
  };
}

// Hand application of the scene, containment and K=1 cross-image rules.
inline std::vector<EntailmentPair> two_image_expected_pairs() {
  return {
      {"img1", "img1_b1", PairKind::scene_to_box}, {"img1", "img1_b2", PairKind::scene_to_box},
      {"img1", "img1_b3", PairKind::scene_to_box}, {"img1_b1", "img1_b2", PairKind::box_to_box},
      {"img1", "img2_b4", PairKind::cross_image},  {"img2", "img2_b4", PairKind::scene_to_box},
      {"img2", "img1_b2", PairKind::cross_image},
  };
}

}  // namespace hierent::fixtures

#endif  // HIERENT_TESTS_FIXTURES_HPP_
