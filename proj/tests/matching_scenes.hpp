#pragma once

// Random detection scenes for checking the greedy matcher against exhaustive
// assignment. Ground-truth boxes of one scene never overlap each other, so a
// prediction can clear an IoU threshold of 0.5 with at most one of them; on
// such scenes greedy matching is optimal.

#include <algorithm>
#include <random>
#include <vector>

#include "bargewatch/dataset.hpp"
#include "bargewatch/geometry.hpp"

namespace scenes {

using namespace bargewatch;

struct MatchScene {
  std::vector<GroundTruthBox> gt;
  std::vector<Detection> pred;
};

// Plain IoU on corner coordinates, written independently of geometry.cpp.
inline double corner_iou(const Box& a, const Box& b) {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  const double inter = (w > 0 && h > 0) ? w * h : 0.0;
  const double area_a = (a.x_max() - a.x_min()) * (a.y_max() - a.y_min());
  const double area_b = (b.x_max() - b.x_min()) * (b.y_max() - b.y_min());
  return inter / (area_a + area_b - inter);
}

inline bool overlaps(const Box& a, const Box& b) {
  return std::min(a.x_max(), b.x_max()) > std::max(a.x_min(), b.x_min()) &&
         std::min(a.y_max(), b.y_max()) > std::max(a.y_min(), b.y_min());
}

inline MatchScene random_scene(std::mt19937& gen) {
  std::uniform_real_distribution<double> pos(0.0, 0.8);
  std::uniform_real_distribution<double> size(0.05, 0.2);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  std::uniform_real_distribution<double> conf(0.05, 1.0);
  std::uniform_int_distribution<int> count(0, 5);
  std::uniform_int_distribution<int> label(0, 2);
  std::bernoulli_distribution near_gt(0.7);
  std::bernoulli_distribution keep_label(0.8);

  MatchScene s;
  const int n_gt = count(gen);
  for (int tries = 0; static_cast<int>(s.gt.size()) < n_gt && tries < 200; ++tries) {
    const double x = pos(gen), y = pos(gen);
    const Box b = Box::normalized(x, y, x + size(gen), y + size(gen));
    if (std::none_of(s.gt.begin(), s.gt.end(), [&](const auto& g) { return overlaps(g.box, b); })) {
      s.gt.push_back({static_cast<ObjectLabel>(label(gen)), b});
    }
  }
  const int n_pred = count(gen);
  for (int i = 0; i < n_pred; ++i) {
    if (!s.gt.empty() && near_gt(gen)) {
      const auto& g = s.gt[std::uniform_int_distribution<std::size_t>(0, s.gt.size() - 1)(gen)];
      const double x0 = std::clamp(g.box.x_min() + jitter(gen), 0.0, 0.95);
      const double y0 = std::clamp(g.box.y_min() + jitter(gen), 0.0, 0.95);
      const double x1 = std::clamp(g.box.x_max() + jitter(gen), x0 + 0.01, 1.0);
      const double y1 = std::clamp(g.box.y_max() + jitter(gen), y0 + 0.01, 1.0);
      const ObjectLabel l = keep_label(gen) ? g.label : static_cast<ObjectLabel>(label(gen));
      s.pred.emplace_back(Box::normalized(x0, y0, x1, y1), l, conf(gen));
    } else {
      const double x = pos(gen), y = pos(gen);
      s.pred.emplace_back(Box::normalized(x, y, x + size(gen), y + size(gen)),
                          static_cast<ObjectLabel>(label(gen)), conf(gen));
    }
  }
  return s;
}

}  // namespace scenes
