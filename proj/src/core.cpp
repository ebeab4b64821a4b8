#include "edgeslice/core.hpp"

#include <cmath>

namespace edgeslice {

std::vector<ResourceKind> default_resource_kinds(int num_resources) {
    static const char* const labels[] = {"radio", "transport", "compute"};
    std::vector<ResourceKind> kinds;
    kinds.reserve(static_cast<std::size_t>(num_resources));
    for (int k = 0; k < num_resources; ++k) {
        kinds.push_back({k, k < 3 ? labels[k] : "resource" + std::to_string(k)});
    }
    return kinds;
}

Allocation Allocation::from_fractions(const Matrix& fractions, const Vector& capacity) {
    if (fractions.cols() != capacity.size()) {
        throw ConfigError("fraction matrix has " + std::to_string(fractions.cols()) +
                          " resources, capacity has " + std::to_string(capacity.size()));
    }
    return {fractions * capacity.asDiagonal()};
}

Matrix Allocation::fractions(const Vector& capacity) const {
    if (amounts.cols() != capacity.size()) {
        throw ConfigError("allocation/capacity resource count mismatch");
    }
    return amounts * capacity.cwiseInverse().asDiagonal();
}

bool Allocation::feasible(const Vector& capacity, double tol) const {
    return (capacity_violation(*this, capacity).array() <= tol).all();
}

double slice_performance(double queue_len, double alpha) {
    if (queue_len == 0.0) return 0.0;
    return -std::pow(queue_len, alpha);
}

Vector capacity_violation(const Allocation& alloc, const Vector& capacity) {
    if (alloc.amounts.cols() != capacity.size()) {
        throw ConfigError("allocation/capacity resource count mismatch");
    }
    Vector over = alloc.amounts.colwise().sum().transpose() - capacity;
    return over.cwiseMax(0.0);
}

void validate(const SliceSpec& slice, int num_resources) {
    const auto who = "slice " + std::to_string(slice.id);
    if (!(slice.alpha > 0.0) || !std::isfinite(slice.alpha)) {
        throw ConfigError(who + ": alpha must be positive");
    }
    if (!std::isfinite(slice.u_min)) throw ConfigError(who + ": u_min must be finite");
    if (slice.demand_weights.size() != num_resources) {
        throw ConfigError(who + ": expected " + std::to_string(num_resources) + " demand weights");
    }
    if (!(slice.demand_weights.array() > 0.0).all() || !slice.demand_weights.allFinite()) {
        throw ConfigError(who + ": demand weights must be strictly positive");
    }
}

void validate(const RASpec& ra, int num_resources) {
    const auto who = "RA " + std::to_string(ra.id);
    if (ra.capacity.size() != num_resources) {
        throw ConfigError(who + ": expected " + std::to_string(num_resources) + " capacities");
    }
    if (!(ra.capacity.array() > 0.0).all() || !ra.capacity.allFinite()) {
        throw ConfigError(who + ": capacity must be strictly positive");
    }
    if (!(ra.service_coeff > 0.0) || !std::isfinite(ra.service_coeff)) {
        throw ConfigError(who + ": service coefficient must be positive");
    }
}

}  // namespace edgeslice
