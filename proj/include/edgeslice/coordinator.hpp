#pragma once

#include "edgeslice/core.hpp"

#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace edgeslice {

/// Auxiliary (z) and scaled dual (y) variables, both I x J.
struct CoordinatorState {
    Matrix z;
    Matrix y;
    double rho = 1.0;
    long iteration = 0;
};

/// z - y per (slice, RA): the only signal agents receive from the coordinator.
struct CoordinationMsg {
    Matrix values;

    std::size_t scalar_count() const { return static_cast<std::size_t>(values.size()); }
    /// Column for one RA.
    Vector for_ra(int ra) const { return values.col(ra); }

    std::string serialize() const;
    static CoordinationMsg deserialize(const std::string& text);
};

/// What one coordination period leaves behind for the coordinator.
struct PeriodReport {
    Matrix perf_sum;                     // I x J, sum over the period of U_{i,j}
    std::vector<Matrix> allocations;     // per RA, mean allocation (logging only)
};

/// Euclidean projection of each row of `a` onto {z : sum_j z_j >= u_min_i}.
Matrix project_rows_onto_sla(const Matrix& a, const Vector& u_min);

/// argmin_z sum ||perf_sum - z + y||^2 s.t. row sums >= u_min.
Matrix z_update(const PeriodReport& report, const Matrix& y, const Vector& u_min);

/// y + (perf_sum - z).
Matrix y_update(const Matrix& y, const PeriodReport& report, const Matrix& z);

/// Initial state: y = 0, z_{i,j} = u_min_i / J.
CoordinatorState initial_coordinator_state(const Vector& u_min, int num_ras, double rho = 1.0);

CoordinationMsg broadcast(const CoordinatorState& state);

struct CoordinationRecord {
    long iteration = 0;
    Matrix z;
    Matrix y;
    Matrix perf_sum;
};

/// True iff each of the last `window` records has primal residual
/// max|perf_sum - z| <= tol_primal and z-drift from its predecessor <= tol_dual.
bool check_convergence(const std::vector<CoordinationRecord>& history, double tol_primal, double tol_dual,
                       int window);

/// CSV: iteration,slice,ra,z,y,sum_u,residual (slice and RA by index).
void write_coordination_log(const std::vector<CoordinationRecord>& history, std::ostream& out);

/// Serial ADMM coordinator. Reports may be submitted from several threads; the
/// update itself runs once all RAs have reported.
class PerformanceCoordinator {
public:
    PerformanceCoordinator(Vector u_min, int num_ras, double rho = 1.0);

    const CoordinatorState& state() const { return state_; }
    const Vector& u_min() const { return u_min_; }
    const std::vector<CoordinationRecord>& history() const { return history_; }
    CoordinationMsg message() const { return broadcast(state_); }

    /// Period performance sums (length I) from RA `ra`.
    void submit(int ra, const Vector& perf_sum, const Matrix& mean_allocation = Matrix());
    bool all_reported() const;

    /// z-update, y-update, history append. Requires every RA to have reported.
    CoordinationMsg update();
    bool converged(double tol_primal, double tol_dual, int window) const;

    /// CSV: iteration,slice,ra,z,y,sum_u,residual.
    void write_log(std::ostream& out) const;

private:
    Vector u_min_;
    CoordinatorState state_;
    std::vector<CoordinationRecord> history_;
    mutable std::mutex mutex_;
    PeriodReport pending_;
    std::vector<bool> reported_;
};

}  // namespace edgeslice
