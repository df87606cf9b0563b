#include "qcurv/field.hpp"

#include <cmath>

#include "qcurv/errors.hpp"
#include "qcurv/grid.hpp"
#include "qcurv/parallel.hpp"

namespace qcurv {

namespace {

bool same_vector(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a - b).lpNorm<Eigen::Infinity>() <= 1e-15;
}

bool same_geometry(const Atom& a, const Atom& b) {
  if (a.order != b.order || !same_vector(a.axis, b.axis)) return false;
  return a.order == 0 || same_vector(a.direction, b.direction);
}

bool is_constant_atom(const Atom& a) {
  if (a.order != 0) return false;
  for (int k = 1; k < a.coeffs.size(); ++k)
    if (a.coeffs(k) != 0.0) return false;
  return true;
}

double atom_value(const ZonalBasis& basis, const Atom& atom, const Point& x) {
  const int count = int(atom.coeffs.size());
  const double t = clamp_cosine(atom.axis.dot(x));
  if (atom.order == 0) return basis.sum(atom.coeffs.data(), count, t);
  return basis.sum_jet(atom.coeffs.data(), count, t).d1 * atom.direction.dot(x);
}

}  // namespace

void Field::add(const Atom& atom) {
  if (n_ == 0) {
    n_ = int(atom.axis.size()) - 1;
    k_max_ = int(atom.coeffs.size()) - 1;
  }
  require(atom.axis.size() == n_ + 1, "atom axis dimension mismatch");
  require(atom.coeffs.size() == k_max_ + 1, "atom coefficient length mismatch");
  require(atom.order == 0 || atom.order == 1, "atom order must be 0 or 1");
  if (atom.order == 1) require(atom.direction.size() == n_ + 1, "atom direction dimension mismatch");
  // Constants are axis-free; keeping all of them in the first order-0 atom
  // lets mean removal cancel exactly.
  Atom incoming = atom;
  if (incoming.order == 0 && incoming.coeffs(0) != 0.0) {
    for (auto& existing : atoms_) {
      if (existing.order == 0) {
        existing.coeffs(0) += incoming.coeffs(0);
        incoming.coeffs(0) = 0.0;
        break;
      }
    }
    if (incoming.coeffs(0) == 0.0 && is_constant_atom(incoming)) return;
  }
  for (auto& existing : atoms_) {
    if (same_geometry(existing, incoming)) {
      existing.coeffs += incoming.coeffs;
      return;
    }
  }
  atoms_.push_back(incoming);
}

void Field::add(const Field& other, double scale) {
  for (const auto& atom : other.atoms_) {
    Atom copy = atom;
    copy.coeffs *= scale;
    add(copy);
  }
}

Field& Field::operator+=(const Field& other) {
  add(other, 1.0);
  return *this;
}

Field& Field::operator-=(const Field& other) {
  add(other, -1.0);
  return *this;
}

Field& Field::operator*=(double s) {
  for (auto& atom : atoms_) atom.coeffs *= s;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

bool Field::axisymmetric() const {
  const Point* axis = principal_axis();
  for (const auto& atom : atoms_) {
    if (atom.order != 0) return false;
    if (axis && !same_vector(atom.axis, *axis) && !is_constant_atom(atom)) return false;
  }
  return true;
}

const Point* Field::principal_axis() const {
  for (const auto& atom : atoms_)
    if (!is_constant_atom(atom)) return &atom.axis;
  return nullptr;
}

Vec Field::zonal_coefficients(const Point& axis) const {
  Vec out = Vec::Zero(k_max_ + 1);
  for (const auto& atom : atoms_) {
    if (atom.order == 0 && same_vector(atom.axis, axis)) {
      out += atom.coeffs;
    } else if (is_constant_atom(atom)) {
      out(0) += atom.coeffs(0);
    } else {
      throw ValidationError("field is not zonal about the requested axis");
    }
  }
  return out;
}

Field apply_diagonal(const Field& u, const Vec& weights) {
  Field out(u.n(), u.k_max());
  for (const auto& atom : u.atoms()) {
    Atom copy = atom;
    copy.coeffs = atom.coeffs.cwiseProduct(weights.head(atom.coeffs.size()));
    out.add(copy);
  }
  return out;
}

void check_field(const ManifoldModel& model, const Field& u) {
  if (u.empty()) return;
  require(u.n() == model.n(), "field dimension does not match the model");
  require(u.k_max() == model.k_max(), "field truncation degree does not match the model");
}

Field apply_gjms(const ManifoldModel& model, const Field& u) {
  check_field(model, u);
  return apply_diagonal(u, model.gjms_eigenvalues());
}

Field invert_gjms(const ManifoldModel& model, const Field& f, Normalization, double solvability_tol) {
  check_field(model, f);
  const double total = integral(model, f);
  const double norm = std::sqrt(std::max(0.0, l2_inner(model, f, f)));
  if (std::abs(total) > solvability_tol * std::max(norm, 1e-300) && std::abs(total) > 0.0)
    throw ValidationError("right-hand side is not orthogonal to constants (solvability)");
  const Vec& mu = model.gjms_eigenvalues();
  const double scale = mu.cwiseAbs().maxCoeff();
  Vec inv = Vec::Zero(mu.size());
  for (int k = 1; k < mu.size(); ++k) {
    if (std::abs(mu(k)) <= 1e-14 * scale) throw NumericalError("degenerate spectrum: zero eigenvalue at a positive degree");
    inv(k) = 1.0 / mu(k);
  }
  // degree 0 is dropped; with constant Q the mean and the Q-average coincide
  return apply_diagonal(f, inv);
}

Field pn_plus_apply(const ManifoldModel& model, const Field& u) {
  check_field(model, u);
  return apply_diagonal(u, model.gjms_eigenvalues().cwiseAbs());
}

Field conformal_laplacian_apply(const ManifoldModel& model, const Field& u) {
  check_field(model, u);
  Vec w(model.coefficient_count());
  for (int k = 0; k < w.size(); ++k) w(k) = model.conformal_laplacian_eigenvalue(k);
  return apply_diagonal(u, w);
}

Field laplacian_apply(const ManifoldModel& model, const Field& u) {
  check_field(model, u);
  Vec w(model.coefficient_count());
  for (int k = 0; k < w.size(); ++k) w(k) = -model.laplace_eigenvalue(k);
  return apply_diagonal(u, w);
}

Vec atom_pair_terms(const ManifoldModel& model, const Atom& a, const Atom& b) {
  const ZonalBasis& basis = model.basis();
  const int count = int(std::min(a.coeffs.size(), b.coeffs.size()));
  const double n = model.n();
  Vec terms = Vec::Zero(count);
  if (same_vector(a.axis, b.axis)) {
    if (a.order == 0 && b.order == 0) return a.coeffs.head(count).cwiseProduct(b.coeffs.head(count));
    if (a.order != b.order) return terms;
    const double vw = a.direction.dot(b.direction);
    for (int k = 1; k < count; ++k) terms(k) = a.coeffs(k) * b.coeffs(k) * basis.laplace_eigenvalue(k) / n * vw;
    return terms;
  }
  const double t = clamp_cosine(a.axis.dot(b.axis));
  std::vector<double> y(count), dy(count), d2y(count);
  basis.values_and_derivatives(t, count, y.data(), dy.data(), d2y.data());
  double vb = 0.0, aw = 0.0, vw = 0.0;
  if (a.order == 1) vb = a.direction.dot(b.axis);
  if (b.order == 1) aw = a.axis.dot(b.direction);
  if (a.order == 1 && b.order == 1) vw = a.direction.dot(b.direction);
  for (int k = 0; k < count; ++k) {
    double kernel;
    if (a.order == 0 && b.order == 0) {
      kernel = y[k];
    } else if (a.order == 1 && b.order == 0) {
      kernel = dy[k] * vb;
    } else if (a.order == 0 && b.order == 1) {
      kernel = dy[k] * aw;
    } else {
      kernel = d2y[k] * vb * aw + dy[k] * vw;
    }
    terms(k) = a.coeffs(k) * b.coeffs(k) * kernel / basis.at_one(k);
  }
  return terms;
}

double atom_inner(const ManifoldModel& model, const Atom& a, const Atom& b, const Vec& weights) {
  const Vec terms = atom_pair_terms(model, a, b);
  return terms.dot(weights.head(terms.size()));
}

namespace {

double weighted_inner(const ManifoldModel& model, const Field& u, const Field& v, const Vec& weights) {
  check_field(model, u);
  check_field(model, v);
  double s = 0.0;
  for (const auto& a : u.atoms())
    for (const auto& b : v.atoms()) s += atom_inner(model, a, b, weights);
  return s;
}

Vec inner_weights(const ManifoldModel& model, InnerWeight w) {
  switch (w) {
    case InnerWeight::L2:
      return Vec::Ones(model.coefficient_count());
    case InnerWeight::Gjms:
      return model.gjms_eigenvalues();
    case InnerWeight::GjmsPositive:
      return model.gjms_eigenvalues().cwiseAbs();
  }
  return Vec::Ones(model.coefficient_count());
}

}  // namespace

double inner(const ManifoldModel& model, const Field& u, const Field& v, InnerWeight w) {
  return weighted_inner(model, u, v, inner_weights(model, w));
}

double l2_inner(const ManifoldModel& model, const Field& u, const Field& v) {
  return inner(model, u, v, InnerWeight::L2);
}

double gjms_inner(const ManifoldModel& model, const Field& u, const Field& v) {
  return inner(model, u, v, InnerWeight::Gjms);
}

double pn_inner(const ManifoldModel& model, const Field& u, const Field& v, double tol) {
  const double qu = q_average(model, u);
  const double qv = q_average(model, v);
  const double nu = std::sqrt(std::max(0.0, l2_inner(model, u, u)));
  const double nv = std::sqrt(std::max(0.0, l2_inner(model, v, v)));
  if (std::abs(qu) > tol * (1.0 + nu) || std::abs(qv) > tol * (1.0 + nv))
    throw ValidationError("pn_inner needs fields with zero Q-average");
  return inner(model, u, v, InnerWeight::GjmsPositive);
}

double pn_norm(const ManifoldModel& model, const Field& u) {
  return std::sqrt(std::max(0.0, inner(model, u, u, InnerWeight::GjmsPositive)));
}

double integral(const ManifoldModel& model, const Field& u) {
  check_field(model, u);
  double s = 0.0;
  for (const auto& atom : u.atoms())
    if (atom.order == 0) s += atom.coeffs(0);
  return s * model.basis().y0() * model.omega();
}

double mean(const ManifoldModel& model, const Field& u) { return integral(model, u) / model.volume(); }

double q_average(const ManifoldModel& model, const Field& u) {
  return model.q_value() * integral(model, u) / model.kappa();
}

Field remove_q_average(const ManifoldModel& model, const Field& u) {
  Field out = u;
  out -= model.constant(q_average(model, u));
  return out;
}

double evaluate(const ManifoldModel& model, const Field& u, const Point& x) {
  check_field(model, u);
  double s = 0.0;
  for (const auto& atom : u.atoms()) s += atom_value(model.basis(), atom, x);
  return s;
}

Vec gradient(const ManifoldModel& model, const Field& u, const Point& x) {
  check_field(model, u);
  Vec g = Vec::Zero(x.size());
  for (const auto& atom : u.atoms()) {
    const int count = int(atom.coeffs.size());
    const double t = clamp_cosine(atom.axis.dot(x));
    const auto jet = model.basis().sum_jet(atom.coeffs.data(), count, t);
    const Vec radial = atom.axis - t * x;
    if (atom.order == 0) {
      g += jet.d1 * radial;
    } else {
      const double vx = atom.direction.dot(x);
      g += jet.d2 * vx * radial + jet.d1 * (atom.direction - vx * x);
    }
  }
  return g;
}

double laplacian_at(const ManifoldModel& model, const Field& u, const Point& x) {
  return evaluate(model, laplacian_apply(model, u), x);
}

Vec degree_energy(const ManifoldModel& model, const Field& u) {
  check_field(model, u);
  Vec out = Vec::Zero(model.coefficient_count());
  for (const auto& a : u.atoms())
    for (const auto& b : u.atoms()) out += atom_pair_terms(model, a, b);
  return out;
}

// ---------------------------------------------------------------------------

AxisGrid::AxisGrid(const ManifoldModel& model, const Point& axis, int direction_degree)
    : model_(&model), axis_(axis), frame_(tangent_frame(axis)), rule_(&model.zonal_rule()) {
  model.check_point(axis);
  dirs_ = sphere_rule(model.n() - 1, direction_degree);
  dir_scale_ = 1.0 / sphere_area(model.n() - 1);
}

Point AxisGrid::point(int q, int d) const {
  const double t = rule_->nodes[q];
  const double r = std::sqrt(std::max(0.0, 1.0 - t * t));
  return t * axis_ + r * (frame_ * dirs_.directions.col(d));
}

Vec AxisGrid::evaluate(const Field& u) const {
  check_field(*model_, u);
  const int nt = t_count();
  const int nd = direction_count();
  Vec values = Vec::Zero(size());
  const ZonalBasis& basis = model_->basis();
  std::vector<Vec> dir_vectors(nd);
  for (int d = 0; d < nd; ++d) dir_vectors[d] = direction(d);
  for (const auto& atom : u.atoms()) {
    const int count = int(atom.coeffs.size());
    if (is_constant_atom(atom)) {
      values.array() += atom.coeffs(0) * basis.y0();
      continue;
    }
    if (same_vector(atom.axis, axis_)) {
      std::vector<double> profile(nt);
      parallel_chunks(nt, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q) {
          const double t = rule_->nodes[q];
          if (atom.order == 0) {
            profile[q] = basis.sum(atom.coeffs.data(), count, t);
          } else {
            profile[q] = basis.sum_jet(atom.coeffs.data(), count, t).d1 * std::sqrt(std::max(0.0, 1.0 - t * t));
          }
        }
      });
      for (int q = 0; q < nt; ++q) {
        for (int d = 0; d < nd; ++d) {
          const double factor = atom.order == 0 ? 1.0 : atom.direction.dot(dir_vectors[d]);
          values(q * nd + d) += profile[q] * factor;
        }
      }
      continue;
    }
    parallel_chunks(std::size_t(nt) * nd, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const int q = int(i / nd), d = int(i % nd);
        values(i) += atom_value(basis, atom, point(q, d));
      }
    });
  }
  return values;
}

double AxisGrid::integrate(const Vec& values) const {
  const int nd = direction_count();
  CompensatedSum s;
  for (int q = 0; q < t_count(); ++q)
    for (int d = 0; d < nd; ++d) s.add(weight(q, d) * values(q * nd + d));
  return s.value();
}

int direction_degree(const Field& u, const Point& axis) {
  int degree = 0;
  for (const auto& atom : u.atoms()) {
    if (is_constant_atom(atom)) continue;
    if (same_vector(atom.axis, axis)) {
      degree = std::max(degree, atom.order);
    } else {
      int top = 0;
      for (int k = int(atom.coeffs.size()) - 1; k >= 0; --k)
        if (atom.coeffs(k) != 0.0) {
          top = k;
          break;
        }
      degree = std::max(degree, top + atom.order);
    }
  }
  return degree;
}

Vec zonal_analysis(const ManifoldModel& model, const std::vector<double>& values) {
  const Rule1D& rule = model.zonal_rule();
  const int nq = int(rule.nodes.size());
  require(int(values.size()) == nq, "zonal analysis needs values on the zonal nodes");
  const int count = model.coefficient_count();
  const ZonalBasis& basis = model.basis();
  const auto& b = basis.b();
  const auto& ib = basis.inv_b();
  const auto ranges = chunk_ranges(std::size_t(nq));
  std::vector<Vec> partial(ranges.size(), Vec::Zero(count));
  parallel_for(ranges.size(), [&](std::size_t c) {
    Vec& out = partial[c];
    constexpr int kBlock = 4;
    for (std::size_t q0 = ranges[c].first; q0 < ranges[c].second; q0 += kBlock) {
      const int width = int(std::min<std::size_t>(kBlock, ranges[c].second - q0));
      double t[kBlock] = {0, 0, 0, 0}, wf[kBlock] = {0, 0, 0, 0};
      double p0[kBlock], p1[kBlock];
      for (int j = 0; j < width; ++j) {
        t[j] = rule.nodes[q0 + j];
        wf[j] = rule.weights[q0 + j] * values[q0 + j];
      }
      double acc0 = 0.0, acc1 = 0.0;
      for (int j = 0; j < kBlock; ++j) {
        p0[j] = basis.y0();
        p1[j] = t[j] * basis.y0() * ib[1];
        acc0 += wf[j] * p0[j];
        acc1 += wf[j] * p1[j];
      }
      out(0) += acc0;
      if (count > 1) out(1) += acc1;
      for (int k = 1; k + 1 < count; ++k) {
        double acc = 0.0;
        for (int j = 0; j < kBlock; ++j) {
          const double p2 = (t[j] * p1[j] - b[k] * p0[j]) * ib[k + 1];
          p0[j] = p1[j];
          p1[j] = p2;
          acc += wf[j] * p2;
        }
        out(k + 1) += acc;
      }
    }
  });
  Vec out = Vec::Zero(count);
  for (const auto& p : partial) out += p;
  return out;
}

std::vector<double> zonal_synthesis(const ManifoldModel& model, const Vec& coeffs) {
  const Rule1D& rule = model.zonal_rule();
  const int nq = int(rule.nodes.size());
  std::vector<double> out(nq);
  const ZonalBasis& basis = model.basis();
  const int count = int(coeffs.size());
  parallel_chunks(std::size_t(nq), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q) out[q] = basis.sum(coeffs.data(), count, rule.nodes[q]);
  });
  return out;
}

std::vector<double> zonal_sample(const ManifoldModel& model, const std::function<double(double)>& profile) {
  const Rule1D& rule = model.zonal_rule();
  std::vector<double> out(rule.nodes.size());
  for (std::size_t q = 0; q < out.size(); ++q) out[q] = profile(rule.nodes[q]);
  return out;
}

}  // namespace qcurv
