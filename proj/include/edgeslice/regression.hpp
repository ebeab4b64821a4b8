#pragma once

#include "edgeslice/core.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace edgeslice {

/// Metric measured for one fraction vector (K entries in [0,1]).
using GroundTruth = std::function<double(const Vector& fractions)>;

/// Full enumeration of [0,1]^K at a fixed granularity. Points are stored in
/// row-major multi-index order, first resource varying slowest.
class GridDataset {
public:
    GridDataset(int num_resources, double granularity, std::vector<double> metrics);

    int num_resources() const { return num_resources_; }
    double granularity() const { return granularity_; }
    int points_per_axis() const { return points_per_axis_; }
    std::size_t size() const { return metrics_.size(); }

    /// Grid coordinates of record `flat`.
    std::vector<int> coords(std::size_t flat) const;
    std::size_t flat_index(const std::vector<int>& coords) const;
    Vector fractions(std::size_t flat) const;
    double metric(std::size_t flat) const { return metrics_[flat]; }
    const std::vector<double>& metrics() const { return metrics_; }

    /// CSV with header fraction_1..fraction_K,metric.
    void write_csv(std::ostream& out) const;
    static GridDataset read_csv(std::istream& in);

private:
    int num_resources_;
    double granularity_;
    int points_per_axis_;
    std::vector<double> metrics_;
};

/// Number of grid steps per axis for a granularity that must divide 1.
int grid_steps(double granularity);

GridDataset build_grid_dataset(const GroundTruth& truth, int num_resources,
                               double granularity = 0.1, std::size_t max_records = 1'000'000);

/// Local affine least-squares surrogate over a GridDataset.
class RegressionOracle {
public:
    /// `neighborhood` = 1 fits on the 2^K corners of the enclosing cell; larger
    /// values widen the box by that many grid steps minus one on every side.
    explicit RegressionOracle(GridDataset dataset, int neighborhood = 1);

    double predict(const Vector& fractions) const;
    const GridDataset& dataset() const { return dataset_; }
    int neighborhood() const { return neighborhood_; }

private:
    double nearest_value(const Vector& fractions) const;

    GridDataset dataset_;
    int neighborhood_;
};

}  // namespace edgeslice
