#pragma once

#include <Eigen/Dense>
#include <omp.h>

#include <cstddef>
#include <utility>

namespace zibr::detail {

// Evaluates fn(unit, row) for every unit in parallel, each writing `width` doubles into its own
// row, then sums the rows in unit order. The sum is therefore independent of the schedule.
template <typename Fn>
Eigen::VectorXd ordered_reduce(std::size_t n_units, Eigen::Index width, Fn&& fn) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(
          static_cast<Eigen::Index>(n_units), width);
  const auto n = static_cast<std::ptrdiff_t>(n_units);
#pragma omp parallel for schedule(static) if (n >= 64 && !omp_in_parallel())
  for (std::ptrdiff_t u = 0; u < n; ++u) {
    fn(static_cast<std::size_t>(u), rows.row(static_cast<Eigen::Index>(u)).data());
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(width);
  for (Eigen::Index u = 0; u < rows.rows(); ++u) total += rows.row(u).transpose();
  return total;
}

// Serial counterpart with the identical summation order.
template <typename Fn>
Eigen::VectorXd serial_reduce(std::size_t n_units, Eigen::Index width, Fn&& fn) {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(width);
  Eigen::VectorXd row(width);
  for (std::size_t u = 0; u < n_units; ++u) {
    row.setZero();
    fn(u, row.data());
    total += row;
  }
  return total;
}

}  // namespace zibr::detail

namespace zibr::detail {

struct ParallelReduce {
  template <typename Fn>
  Eigen::VectorXd operator()(std::size_t n_units, Eigen::Index width, Fn&& fn) const {
    return ordered_reduce(n_units, width, std::forward<Fn>(fn));
  }
};

struct SerialReduce {
  template <typename Fn>
  Eigen::VectorXd operator()(std::size_t n_units, Eigen::Index width, Fn&& fn) const {
    return serial_reduce(n_units, width, std::forward<Fn>(fn));
  }
};

}  // namespace zibr::detail
