#pragma once

#include <vector>

#include "med/types.hpp"

namespace med {

/// An ordered point set in [0,1]^p with exact log-density values and the stage at
/// which each point was evaluated.
struct Design {
    PointSet points;
    std::vector<double> logf;
    std::vector<int> stage;
    int k = 0;
    double gamma = 1.0;

    std::size_t size() const { return points.size(); }
    std::size_t dim() const { return points.dim(); }
};

}  // namespace med
