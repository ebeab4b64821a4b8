#include "edgeslice/regression.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace edgeslice {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace

int grid_steps(double granularity) {
    if (!(granularity > 0.0) || granularity > 1.0) {
        throw ConfigError("granularity must lie in (0, 1]");
    }
    const double inv = 1.0 / granularity;
    const long steps = std::lround(inv);
    if (std::abs(inv - static_cast<double>(steps)) > 1e-9 * inv) {
        throw ConfigError("granularity " + format_double(granularity) + " does not divide 1");
    }
    return static_cast<int>(steps);
}

GridDataset::GridDataset(int num_resources, double granularity, std::vector<double> metrics)
    : num_resources_(num_resources),
      granularity_(granularity),
      points_per_axis_(grid_steps(granularity) + 1),
      metrics_(std::move(metrics)) {
    if (num_resources_ < 1) throw ConfigError("grid dataset needs at least one resource");
    if (metrics_.size() != ipow(static_cast<std::size_t>(points_per_axis_), num_resources_)) {
        throw ConfigError("grid dataset has " + std::to_string(metrics_.size()) +
                          " records, expected a full grid");
    }
}

std::vector<int> GridDataset::coords(std::size_t flat) const {
    std::vector<int> c(static_cast<std::size_t>(num_resources_));
    for (int k = num_resources_ - 1; k >= 0; --k) {
        c[static_cast<std::size_t>(k)] = static_cast<int>(flat % points_per_axis_);
        flat /= points_per_axis_;
    }
    return c;
}

std::size_t GridDataset::flat_index(const std::vector<int>& coords) const {
    std::size_t flat = 0;
    for (int c : coords) flat = flat * static_cast<std::size_t>(points_per_axis_) + static_cast<std::size_t>(c);
    return flat;
}

Vector GridDataset::fractions(std::size_t flat) const {
    const auto c = coords(flat);
    const int steps = points_per_axis_ - 1;
    Vector f(num_resources_);
    for (int k = 0; k < num_resources_; ++k) {
        f(k) = static_cast<double>(c[static_cast<std::size_t>(k)]) / steps;
    }
    return f;
}

void GridDataset::write_csv(std::ostream& out) const {
    for (int k = 0; k < num_resources_; ++k) out << "fraction_" << (k + 1) << ',';
    out << "metric\n";
    for (std::size_t n = 0; n < metrics_.size(); ++n) {
        const Vector f = fractions(n);
        for (int k = 0; k < num_resources_; ++k) out << format_double(f(k)) << ',';
        out << format_double(metrics_[n]) << '\n';
    }
}

GridDataset GridDataset::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("grid dataset: empty file");
    const int num_resources = static_cast<int>(std::count(line.begin(), line.end(), ','));
    if (num_resources < 1) throw ConfigError("grid dataset: header needs fraction columns");

    std::vector<std::pair<std::vector<double>, double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw ConfigError("grid dataset line " + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
            values.push_back(v);
        }
        if (static_cast<int>(values.size()) != num_resources + 1) {
            throw ConfigError("grid dataset line " + std::to_string(line_no) + ": wrong column count");
        }
        const double metric = values.back();
        values.pop_back();
        rows.emplace_back(std::move(values), metric);
    }
    if (rows.empty()) throw ConfigError("grid dataset: no records");

    const double per_axis = std::pow(static_cast<double>(rows.size()), 1.0 / num_resources);
    const int points = static_cast<int>(std::lround(per_axis));
    if (points < 2) throw ConfigError("grid dataset: need at least two points per axis");
    const int steps = points - 1;

    std::vector<double> metrics(rows.size(), 0.0);
    std::vector<bool> seen(rows.size(), false);
    GridDataset shape(num_resources, 1.0 / steps, std::vector<double>(rows.size(), 0.0));
    for (const auto& [fr, metric] : rows) {
        std::vector<int> c(fr.size());
        for (std::size_t k = 0; k < fr.size(); ++k) {
            const double scaled = fr[k] * steps;
            const long idx = std::lround(scaled);
            if (idx < 0 || idx > steps || std::abs(scaled - static_cast<double>(idx)) > 1e-6) {
                throw ConfigError("grid dataset: fraction " + format_double(fr[k]) + " is off the grid");
            }
            c[k] = static_cast<int>(idx);
        }
        const auto flat = shape.flat_index(c);
        if (seen[flat]) throw ConfigError("grid dataset: duplicate grid point");
        seen[flat] = true;
        metrics[flat] = metric;
    }
    return GridDataset(num_resources, 1.0 / steps, std::move(metrics));
}

GridDataset build_grid_dataset(const GroundTruth& truth, int num_resources, double granularity,
                               std::size_t max_records) {
    const int steps = grid_steps(granularity);
    const double count = std::pow(static_cast<double>(steps + 1), num_resources);
    if (count > static_cast<double>(max_records)) {
        throw ConfigError("grid enumeration of " + format_double(count) + " points exceeds cap " +
                          std::to_string(max_records));
    }
    const std::size_t n = static_cast<std::size_t>(count);
    GridDataset dataset(num_resources, granularity, std::vector<double>(n, 0.0));
    std::vector<double> metrics(n);
    for (std::size_t i = 0; i < n; ++i) metrics[i] = truth(dataset.fractions(i));
    return GridDataset(num_resources, granularity, std::move(metrics));
}

RegressionOracle::RegressionOracle(GridDataset dataset, int neighborhood)
    : dataset_(std::move(dataset)), neighborhood_(neighborhood) {
    if (neighborhood_ < 1) throw ConfigError("regression neighborhood must be >= 1");
}

double RegressionOracle::nearest_value(const Vector& fractions) const {
    const int steps = dataset_.points_per_axis() - 1;
    std::vector<int> c(static_cast<std::size_t>(dataset_.num_resources()));
    for (int k = 0; k < dataset_.num_resources(); ++k) {
        c[static_cast<std::size_t>(k)] =
            static_cast<int>(std::clamp<long>(std::lround(fractions(k) * steps), 0, steps));
    }
    return dataset_.metric(dataset_.flat_index(c));
}

double RegressionOracle::predict(const Vector& fractions) const {
    const int dims = dataset_.num_resources();
    if (fractions.size() != dims) throw ConfigError("predict: fraction vector has wrong length");
    const int steps = dataset_.points_per_axis() - 1;

    // Index box [lo_k, hi_k] around the query on every axis.
    std::vector<int> lo(static_cast<std::size_t>(dims)), hi(static_cast<std::size_t>(dims));
    for (int k = 0; k < dims; ++k) {
        const double scaled = std::clamp(fractions(k), 0.0, 1.0) * steps;
        const int cell = std::clamp(static_cast<int>(std::floor(scaled)), 0, steps - 1);
        lo[static_cast<std::size_t>(k)] = std::max(0, cell - (neighborhood_ - 1));
        hi[static_cast<std::size_t>(k)] = std::min(steps, cell + neighborhood_);
    }

    std::size_t count = 1;
    for (int k = 0; k < dims; ++k) {
        count *= static_cast<std::size_t>(hi[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)] + 1);
    }
    Matrix design(static_cast<Eigen::Index>(count), dims + 1);
    Vector target(static_cast<Eigen::Index>(count));
    std::vector<int> c = lo;
    for (std::size_t row = 0; row < count; ++row) {
        const auto r = static_cast<Eigen::Index>(row);
        design(r, 0) = 1.0;
        for (int k = 0; k < dims; ++k) {
            design(r, k + 1) = static_cast<double>(c[static_cast<std::size_t>(k)]) / steps;
        }
        target(r) = dataset_.metric(dataset_.flat_index(c));
        for (int k = dims - 1; k >= 0; --k) {
            auto& ck = c[static_cast<std::size_t>(k)];
            if (++ck <= hi[static_cast<std::size_t>(k)]) break;
            ck = lo[static_cast<std::size_t>(k)];
        }
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < dims + 1) return nearest_value(fractions);
    const Vector coef = qr.solve(target);
    Vector x(dims + 1);
    x(0) = 1.0;
    x.tail(dims) = fractions;
    return x.dot(coef);
}

}  // namespace edgeslice
