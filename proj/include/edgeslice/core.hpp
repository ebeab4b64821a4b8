#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace edgeslice {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for any inconsistent dimensions, ids or parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ResourceKind {
    int index = 0;
    std::string label;  // radio, transport, compute by convention
};

std::vector<ResourceKind> default_resource_kinds(int num_resources);

struct SliceSpec {
    int id = 0;
    double u_min = 0.0;     // minimum period-cumulative performance (SLA)
    double alpha = 2.0;     // performance exponent
    Vector demand_weights;  // K positive reals
};

struct RASpec {
    int id = 0;
    Vector capacity;            // R_j^tot, K positive reals
    double service_coeff = 1.0;  // tasks served per interval at full normalized allocation
};

/// Resources given to each slice inside one RA for one interval, in absolute units.
/// Rows are slices, columns are resources. Feasibility is checked, not enforced.
struct Allocation {
    Matrix amounts;

    int num_slices() const { return static_cast<int>(amounts.rows()); }
    int num_resources() const { return static_cast<int>(amounts.cols()); }

    static Allocation zeros(int num_slices, int num_resources) {
        return {Matrix::Zero(num_slices, num_resources)};
    }
    static Allocation from_fractions(const Matrix& fractions, const Vector& capacity);

    /// amounts / capacity, column-wise.
    Matrix fractions(const Vector& capacity) const;
    bool feasible(const Vector& capacity, double tol = 0.0) const;
};

/// One value per (slice, RA): a single interval or a sum over a period.
struct PerfMatrix {
    Matrix values;

    static PerfMatrix zeros(int num_slices, int num_ras) {
        return {Matrix::Zero(num_slices, num_ras)};
    }
    double total() const { return values.sum(); }
};

/// U = -(queue_len)^alpha.
double slice_performance(double queue_len, double alpha);

/// Per-resource hinge max(0, column_sum - capacity).
Vector capacity_violation(const Allocation& alloc, const Vector& capacity);

void validate(const SliceSpec& slice, int num_resources);
void validate(const RASpec& ra, int num_resources);

}  // namespace edgeslice
