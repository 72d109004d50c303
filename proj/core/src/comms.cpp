#include "dmaddpg/comms.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dmaddpg/format.hpp"

namespace dmaddpg {

std::string stochasticity_violation(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) return "matrix must be square and non-empty";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v)) return "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is not finite";
      if (v < 0.0) return "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative";
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      return "row " + std::to_string(i) + " sums to " + format_double(sum);
    }
  }
  return {};
}

CommMatrix::CommMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  const std::string problem = stochasticity_violation(entries_);
  if (!problem.empty()) throw std::invalid_argument("CommMatrix: " + problem);
}

std::vector<double> CommMatrix::row(int i) const {
  std::vector<double> r(static_cast<std::size_t>(n_agents()));
  for (int j = 0; j < n_agents(); ++j) r[static_cast<std::size_t>(j)] = entries_(i, j);
  return r;
}

bool CommMatrix::is_identity() const { return entries_.isIdentity(0.0); }

double CommMatrix::max_row_sum_error() const {
  return (entries_.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

CommMatrix CommMatrix::identity(int n) {
  if (n < 1) throw std::invalid_argument("CommMatrix::identity: n must be >= 1");
  return CommMatrix(Eigen::MatrixXd::Identity(n, n));
}

namespace {

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("communication eta must lie in [0, 1]");
}

Eigen::MatrixXd cooperative_block(int n, double eta) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, eta / static_cast<double>(n - 1));
  m.diagonal().setConstant(1.0 - eta);
  return m;
}

}  // namespace

CommMatrix build_cooperative(int n, double eta) {
  if (n < 2) throw std::invalid_argument("build_cooperative: need at least 2 agents");
  check_eta(eta);
  return CommMatrix(cooperative_block(n, eta));
}

CommMatrix build_one_vs_n(int n_total, double eta) {
  if (n_total < 3) throw std::invalid_argument("build_one_vs_n: need an adversary and at least 2 team members");
  check_eta(eta);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_total, n_total);
  m(0, 0) = 1.0;
  m.bottomRightCorner(n_total - 1, n_total - 1) = cooperative_block(n_total - 1, eta);
  return CommMatrix(std::move(m));
}

CommMatrix build_ring(int n, double eta) {
  if (n < 2) throw std::invalid_argument("build_ring: need at least 2 agents");
  check_eta(eta);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = 1.0 - eta;
    m(i, (i + 1) % n) = eta;
  }
  return CommMatrix(std::move(m));
}

CommMatrix load_comm_matrix(std::istream& in) {
  long long n = 0;
  if (!(in >> n) || n < 1 || n > 100000) throw std::invalid_argument("comm matrix file: bad agent count on first line");
  Eigen::MatrixXd m(n, n);
  for (long long i = 0; i < n; ++i) {
    for (long long j = 0; j < n; ++j) {
      if (!(in >> m(i, j))) {
        throw std::invalid_argument("comm matrix file: expected " + std::to_string(n * n) + " entries");
      }
    }
  }
  std::string trailing;
  if (in >> trailing) throw std::invalid_argument("comm matrix file: unexpected trailing content '" + trailing + "'");
  return CommMatrix(std::move(m));
}

CommMatrix load_comm_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open comm matrix file '" + path + "'");
  return load_comm_matrix(in);
}

void write_comm_matrix(std::ostream& out, const CommMatrix& m) {
  out << m.n_agents() << '\n';
  for (int i = 0; i < m.n_agents(); ++i) {
    for (int j = 0; j < m.n_agents(); ++j) out << (j ? " " : "") << format_double(m(i, j));
    out << '\n';
  }
}

CommSchedule constant_schedule(CommMatrix m) {
  auto shared = std::make_shared<const CommMatrix>(std::move(m));
  return [shared](std::int64_t) -> const CommMatrix& { return *shared; };
}

void ConsensusConfig::validate() const {
  if (!(zeta >= 0.0)) throw std::invalid_argument("ConsensusConfig: zeta must be >= 0");
  check_eta(eta);
  if (!(denom_floor > 0.0)) throw std::invalid_argument("ConsensusConfig: denom_floor must be > 0");
}

std::vector<ParamVector> hard_consensus(std::span<const ParamVector> critics, const CommMatrix& c) {
  if (critics.size() != static_cast<std::size_t>(c.n_agents())) {
    throw std::invalid_argument("hard_consensus: matrix size does not match number of critics");
  }
  for (const ParamVector& p : critics) {
    if (p.size() != critics.front().size()) throw std::invalid_argument("hard_consensus: critic lengths differ");
  }
  std::vector<ParamVector> out;
  out.reserve(critics.size());
  for (int i = 0; i < c.n_agents(); ++i) {
    out.push_back(consensus_row(c, i, [&](int j) -> const ParamVector& { return critics[static_cast<std::size_t>(j)]; }));
  }
  return out;
}

ParamVector consensus_row(const CommMatrix& c, int i, const std::function<const ParamVector&(int j)>& fetch) {
  std::vector<double> weights;
  std::vector<const ParamVector*> params;
  for (int j = 0; j < c.n_agents(); ++j) {
    if (c(i, j) > 0.0) {
      weights.push_back(c(i, j));
      params.push_back(&fetch(j));
    }
  }
  return param_weighted_sum(weights, std::span<const ParamVector* const>(params));
}

SoftPenalty soft_penalty(const ParamVector& own, std::span<const ParamVector* const> all_params,
                         std::span<const double> row, double zeta, double denom_floor, int self_index) {
  if (row.size() != all_params.size()) throw std::invalid_argument("soft_penalty: row and parameter list lengths differ");
  if (!(zeta >= 0.0) || !(denom_floor >= 0.0)) throw std::invalid_argument("soft_penalty: zeta and floor must be >= 0");
  SoftPenalty p{0.0, ParamVector::zeros(own.size())};
  if (zeta == 0.0) return p;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] < 0.0) throw std::invalid_argument("soft_penalty: negative row entry");
    if (row[j] == 0.0 || static_cast<int>(j) == self_index) continue;
    const ParamVector& other = *all_params[j];
    if (other.size() != own.size()) throw std::invalid_argument("soft_penalty: parameter lengths differ");
    const Eigen::VectorXd diff = own.values - other.values;
    const double diff_sq = diff.squaredNorm();
    if (diff_sq == 0.0) continue;
    const double denom = other.values.squaredNorm() + denom_floor;
    p.value += row[j] * diff_sq / denom;
    p.gradient.values += (2.0 * row[j] / denom) * diff;
  }
  p.value *= zeta;
  p.gradient.values *= zeta;
  return p;
}

SoftPenalty soft_penalty(const ParamVector& own, std::span<const ParamVector> all_params,
                         std::span<const double> row, double zeta, double denom_floor, int self_index) {
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(all_params.size());
  for (const ParamVector& p : all_params) ptrs.push_back(&p);
  return soft_penalty(own, std::span<const ParamVector* const>(ptrs), row, zeta, denom_floor, self_index);
}

}  // namespace dmaddpg
