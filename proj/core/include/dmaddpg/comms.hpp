#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dmaddpg/nn.hpp"

namespace dmaddpg {

inline constexpr double kStochasticTolerance = 1e-12;

// Right-stochastic communication matrix. Entry (i, j) > 0 means agent i
// receives critic parameters from agent j.
class CommMatrix {
 public:
  // Throws std::invalid_argument unless square, non-negative, finite and
  // every row sums to 1 within kStochasticTolerance.
  explicit CommMatrix(Eigen::MatrixXd entries);

  int n_agents() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }
  std::vector<double> row(int i) const;
  bool is_identity() const;

  // Largest |row sum - 1|.
  double max_row_sum_error() const;

  static CommMatrix identity(int n);

 private:
  Eigen::MatrixXd entries_;
};

// Returns an empty string when `m` is right-stochastic, otherwise a
// description of the first violation.
std::string stochasticity_violation(const Eigen::MatrixXd& m);

// 1 - eta on the diagonal, eta / (N - 1) elsewhere.
CommMatrix build_cooperative(int n, double eta);
// Agent 0 (the adversary) isolated; cooperative block over agents 1..N-1.
CommMatrix build_one_vs_n(int n_total, double eta);
// 1 - eta on the diagonal, eta on the superdiagonal, eta at (N-1, 0).
CommMatrix build_ring(int n, double eta);

// Plain text: first line N, then N rows of N whitespace-separated reals.
CommMatrix load_comm_matrix(std::istream& in);
CommMatrix load_comm_matrix_file(const std::string& path);
void write_comm_matrix(std::ostream& out, const CommMatrix& m);

// Communication network as a function of the environment step.
using CommSchedule = std::function<const CommMatrix&(std::int64_t step)>;
CommSchedule constant_schedule(CommMatrix m);

struct ConsensusConfig {
  double zeta = 0.1;
  double eta = 0.001;
  double denom_floor = 1e-8;

  void validate() const;
};

// new[i] = sum_j C(i, j) * old[j], evaluated from a snapshot of the inputs.
std::vector<ParamVector> hard_consensus(std::span<const ParamVector> critics, const CommMatrix& c);

// Row i of the consensus average; `fetch(j)` is called only for C(i, j) > 0.
ParamVector consensus_row(const CommMatrix& c, int i, const std::function<const ParamVector&(int j)>& fetch);

struct SoftPenalty {
  double value = 0.0;
  ParamVector gradient;
};

// zeta * sum_j row[j] * |own - all[j]|^2 / (|all[j]|^2 + denom_floor) and its
// gradient with respect to `own`; all[j] are constants. Entries with
// row[j] == 0 are not read, and the self entry (self_index) contributes nothing.
SoftPenalty soft_penalty(const ParamVector& own, std::span<const ParamVector* const> all_params,
                         std::span<const double> row, double zeta, double denom_floor, int self_index = -1);
SoftPenalty soft_penalty(const ParamVector& own, std::span<const ParamVector> all_params,
                         std::span<const double> row, double zeta, double denom_floor, int self_index = -1);

}  // namespace dmaddpg
