#include "crsr/error.hpp"
#include "crsr/metrics.hpp"

#include <set>

namespace crsr {

double rank1(const RecognitionSplit& split) {
  if (split.gallery.rows() == 0 || split.probes.rows() == 0) {
    throw NoDataError("rank1 needs a nonempty gallery and probe set");
  }
  if (static_cast<size_t>(split.gallery.rows()) != split.gallery_ids.size() ||
      static_cast<size_t>(split.probes.rows()) != split.probe_ids.size()) {
    throw ShapeError("rank1: one identity label per embedding required");
  }
  if (split.gallery.cols() != split.probes.cols()) {
    throw ShapeError("rank1: gallery and probe dimensions differ");
  }
  const std::set<int> known(split.gallery_ids.begin(), split.gallery_ids.end());
  for (int id : split.probe_ids) {
    if (!known.contains(id)) {
      throw ConfigError("probe_ids", "probe identity " + std::to_string(id) + " not in gallery");
    }
  }

  auto normalized = [](const Eigen::MatrixXd& m) {
    Eigen::VectorXd norms = m.rowwise().norm().cwiseMax(1e-12);
    return Eigen::MatrixXd(norms.cwiseInverse().asDiagonal() * m);
  };
  const Eigen::MatrixXd similarity = normalized(split.probes) * normalized(split.gallery).transpose();

  int hits = 0;
  for (Eigen::Index p = 0; p < similarity.rows(); ++p) {
    Eigen::Index best = 0;
    for (Eigen::Index g = 1; g < similarity.cols(); ++g) {
      if (similarity(p, g) > similarity(p, best)) best = g;
    }
    if (split.gallery_ids[static_cast<size_t>(best)] == split.probe_ids[static_cast<size_t>(p)]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(similarity.rows());
}

}  // namespace crsr
