#include "edgeslice/coordinator.hpp"

#include "edgeslice/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace edgeslice {

std::string CoordinationMsg::serialize() const {
    std::ostringstream out;
    out << "coordination 1\n";
    text_io::write_matrix(out, values);
    return out.str();
}

CoordinationMsg CoordinationMsg::deserialize(const std::string& text) {
    std::istringstream in(text);
    const std::string ctx = "coordination message";
    text_io::expect(in, "coordination", ctx);
    if (text_io::parse_long(in, ctx) != 1) throw ConfigError(ctx + ": unsupported version");
    return {text_io::read_matrix(in, ctx)};
}

Matrix project_rows_onto_sla(const Matrix& a, const Vector& u_min) {
    if (a.rows() != u_min.size()) throw ConfigError("SLA projection: one u_min per slice required");
    Matrix z = a;
    const double J = static_cast<double>(a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double deficit = u_min(i) - a.row(i).sum();
        if (deficit > 0.0) {
            z.row(i).array() += deficit / J;
            // Rounding can leave the row a few ulps short of the boundary.
            for (double shortfall = u_min(i) - z.row(i).sum(); shortfall > 0.0;
                 shortfall = u_min(i) - z.row(i).sum()) {
                const double mag = std::max(std::abs(u_min(i)), z.row(i).cwiseAbs().maxCoeff());
                const double ulp = std::nextafter(mag, HUGE_VAL) - mag;
                z(i, 0) += std::max(shortfall, ulp);
            }
        }
    }
    return z;
}

Matrix z_update(const PeriodReport& report, const Matrix& y, const Vector& u_min) {
    if (report.perf_sum.rows() != y.rows() || report.perf_sum.cols() != y.cols()) {
        throw ConfigError("z_update: report and dual variables differ in shape");
    }
    return project_rows_onto_sla(report.perf_sum + y, u_min);
}

Matrix y_update(const Matrix& y, const PeriodReport& report, const Matrix& z) {
    if (report.perf_sum.rows() != y.rows() || report.perf_sum.cols() != y.cols() || z.rows() != y.rows() ||
        z.cols() != y.cols()) {
        throw ConfigError("y_update: shape mismatch");
    }
    return y + (report.perf_sum - z);
}

CoordinatorState initial_coordinator_state(const Vector& u_min, int num_ras, double rho) {
    if (num_ras < 1) throw ConfigError("coordinator needs at least one RA");
    if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
    CoordinatorState s;
    s.y = Matrix::Zero(u_min.size(), num_ras);
    // SLA rows split evenly, so the first target sits exactly on the boundary.
    s.z = (u_min / static_cast<double>(num_ras)).replicate(1, num_ras);
    s.rho = rho;
    return s;
}

CoordinationMsg broadcast(const CoordinatorState& state) { return {state.z - state.y}; }

bool check_convergence(const std::vector<CoordinationRecord>& history, double tol_primal, double tol_dual,
                       int window) {
    if (window < 1) throw ConfigError("convergence window must be >= 1");
    if (history.size() < static_cast<std::size_t>(window) + 1) return false;
    for (std::size_t n = history.size() - static_cast<std::size_t>(window); n < history.size(); ++n) {
        const auto& cur = history[n];
        const double primal = (cur.perf_sum - cur.z).cwiseAbs().maxCoeff();
        const double drift = (cur.z - history[n - 1].z).cwiseAbs().maxCoeff();
        if (!(primal <= tol_primal) || !(drift <= tol_dual)) return false;
    }
    return true;
}

PerformanceCoordinator::PerformanceCoordinator(Vector u_min, int num_ras, double rho)
    : u_min_(std::move(u_min)), state_(initial_coordinator_state(u_min_, num_ras, rho)) {
    pending_.perf_sum = Matrix::Zero(u_min_.size(), num_ras);
    pending_.allocations.resize(static_cast<std::size_t>(num_ras));
    reported_.assign(static_cast<std::size_t>(num_ras), false);
}

void PerformanceCoordinator::submit(int ra, const Vector& perf_sum, const Matrix& mean_allocation) {
    std::lock_guard lock(mutex_);
    if (ra < 0 || ra >= pending_.perf_sum.cols()) throw ConfigError("report from unknown RA " + std::to_string(ra));
    if (perf_sum.size() != pending_.perf_sum.rows()) throw ConfigError("report has the wrong number of slices");
    if (!perf_sum.allFinite()) throw ConfigError("report from RA " + std::to_string(ra) + " is not finite");
    pending_.perf_sum.col(ra) = perf_sum;
    pending_.allocations[static_cast<std::size_t>(ra)] = mean_allocation;
    reported_[static_cast<std::size_t>(ra)] = true;
}

bool PerformanceCoordinator::all_reported() const {
    std::lock_guard lock(mutex_);
    return std::all_of(reported_.begin(), reported_.end(), [](bool b) { return b; });
}

CoordinationMsg PerformanceCoordinator::update() {
    std::lock_guard lock(mutex_);
    if (!std::all_of(reported_.begin(), reported_.end(), [](bool b) { return b; })) {
        throw ConfigError("coordinator update before every RA reported");
    }
    state_.z = z_update(pending_, state_.y, u_min_);
    state_.y = y_update(state_.y, pending_, state_.z);
    ++state_.iteration;
    history_.push_back({state_.iteration, state_.z, state_.y, pending_.perf_sum});
    std::fill(reported_.begin(), reported_.end(), false);
    return broadcast(state_);
}

bool PerformanceCoordinator::converged(double tol_primal, double tol_dual, int window) const {
    return check_convergence(history_, tol_primal, tol_dual, window);
}

void PerformanceCoordinator::write_log(std::ostream& out) const {
    std::lock_guard lock(mutex_);
    write_coordination_log(history_, out);
}

void write_coordination_log(const std::vector<CoordinationRecord>& history, std::ostream& out) {
    out << "# edgeslice coordination-log v1\n";
    out << "iteration,slice,ra,z,y,sum_u,residual\n";
    for (const auto& rec : history) {
        for (Eigen::Index i = 0; i < rec.z.rows(); ++i) {
            for (Eigen::Index j = 0; j < rec.z.cols(); ++j) {
                out << rec.iteration << ',' << i << ',' << j << ',' << text_io::format(rec.z(i, j)) << ','
                    << text_io::format(rec.y(i, j)) << ',' << text_io::format(rec.perf_sum(i, j)) << ','
                    << text_io::format(rec.perf_sum(i, j) - rec.z(i, j)) << '\n';
            }
        }
    }
}

}  // namespace edgeslice
