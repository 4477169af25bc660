// chamfer.hpp — symmetric Chamfer distance with correspondence pruning.
//
// Both directions are means over *surviving* matches. A match survives when
// its unsquared Euclidean distance is <= the pruning threshold; the summed
// quantity is the squared distance by default (unsquared behind a flag). If a
// direction has no survivors its term is 0 and a flag records that.
//
// Summation is in point-index order regardless of how the NN lookups were
// parallelized, so the value is bit-stable for any worker count.
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "headcraft/kdtree.hpp"
#include "headcraft/parallel.hpp"
#include "headcraft/vec3.hpp"

namespace headcraft {

struct Correspondence {
    int target = -1;       // index in the other cloud
    double distance = 0.0;  // unsquared
    bool survived = false;
};

struct ChamferResult {
    double value = 0.0;
    double forward = 0.0;   // mean over surviving P1 -> P2 matches
    double backward = 0.0;  // mean over surviving P2 -> P1 matches
    std::size_t forward_survivors = 0;
    std::size_t backward_survivors = 0;
    bool forward_empty = false;   // set when a direction lost every match
    bool backward_empty = false;
    std::vector<Correspondence> p1_to_p2;
    std::vector<Correspondence> p2_to_p1;
};

namespace detail {

inline void chamfer_direction(const std::vector<Vec3>& from, const PointIndex& to_index,
                              double threshold, bool squared, int workers,
                              std::vector<Correspondence>& corr, double& mean_out,
                              std::size_t& survivors_out, bool& empty_out) {
    corr.resize(from.size());
    parallel_for(from.size(), workers, [&](std::size_t i) {
        auto hit = to_index.nearest(from[i]);
        Correspondence c;
        c.target = hit.index;
        c.distance = std::sqrt(hit.dist2);
        c.survived = c.distance <= threshold;
        corr[i] = c;
    });
    double sum = 0.0;
    std::size_t n = 0;
    for (const Correspondence& c : corr) {
        if (!c.survived) continue;
        sum += squared ? c.distance * c.distance : c.distance;
        ++n;
    }
    survivors_out = n;
    empty_out = n == 0;
    mean_out = n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace detail

// Variant taking prebuilt indices; registration reuses the scan index across
// steps.
inline ChamferResult chamfer_pruned(const std::vector<Vec3>& p1, const PointIndex& idx1,
                                    const std::vector<Vec3>& p2, const PointIndex& idx2,
                                    double threshold, bool squared = true, int workers = 1) {
    ChamferResult r;
    detail::chamfer_direction(p1, idx2, threshold, squared, workers, r.p1_to_p2, r.forward,
                              r.forward_survivors, r.forward_empty);
    detail::chamfer_direction(p2, idx1, threshold, squared, workers, r.p2_to_p1, r.backward,
                              r.backward_survivors, r.backward_empty);
    r.value = r.forward + r.backward;
    return r;
}

inline ChamferResult chamfer_pruned(const std::vector<Vec3>& p1, const std::vector<Vec3>& p2,
                                    double threshold, bool squared = true, int workers = 1) {
    if (p1.empty() || p2.empty()) throw std::runtime_error("chamfer_pruned: empty point set");
    if (!(threshold > 0.0)) throw std::runtime_error("chamfer_pruned: threshold must be > 0");
    PointIndex idx1(p1), idx2(p2);
    return chamfer_pruned(p1, idx1, p2, idx2, threshold, squared, workers);
}

// Unpruned squared symmetric Chamfer; the flavor the set-level metrics use.
inline double chamfer_symmetric(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                                int workers = 1) {
    return chamfer_pruned(a, b, std::numeric_limits<double>::infinity(), /*squared=*/true, workers)
        .value;
}

}  // namespace headcraft
