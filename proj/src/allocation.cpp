#include "omni/allocation.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace omni {
namespace {

constexpr double kRankTol = 1e-8;

struct HalfPlane {
  Vec2 a;    // a' X <= b
  double b;
};

// 16 half-planes of u_min <= u_0 + n_A X <= u_max, upper bounds first.
std::vector<HalfPlane> box_halfplanes(const Vec8& u_0, const Mat82& n_A,
                                      const Vec8& u_min, const Vec8& u_max) {
  std::vector<HalfPlane> hp;
  hp.reserve(16);
  for (int i = 0; i < 8; ++i) {
    hp.push_back({n_A.row(i).transpose(), u_max(i) - u_0(i)});
  }
  for (int i = 0; i < 8; ++i) {
    hp.push_back({-n_A.row(i).transpose(), u_0(i) - u_min(i)});
  }
  return hp;
}

double max_violation(const std::vector<HalfPlane>& hp, const Vec2& x) {
  double v = 0.0;
  for (const auto& h : hp) v = std::max(v, h.a.dot(x) - h.b);
  return v;
}

// Chebyshev-style diagnostic: minimize t over (X, t) subject to
// a_i' X - b_i <= t, by enumerating all vertices with three active
// constraints of the lifted 3-D LP.
Vec2 least_max_violation(const std::vector<HalfPlane>& hp) {
  const int n = static_cast<int>(hp.size());
  Vec2 best = Vec2::Zero();
  double best_t = max_violation(hp, best);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        Eigen::Matrix3d M;
        M << hp[i].a.x(), hp[i].a.y(), -1.0,  //
            hp[j].a.x(), hp[j].a.y(), -1.0,   //
            hp[k].a.x(), hp[k].a.y(), -1.0;
        if (std::abs(M.determinant()) < 1e-12) continue;
        Vec3 sol = M.fullPivLu().solve(Vec3(hp[i].b, hp[j].b, hp[k].b));
        Vec2 x(sol.x(), sol.y());
        double t = max_violation(hp, x);
        if (t < best_t) {
          best_t = t;
          best = x;
        }
      }
    }
  }
  return best;
}

}  // namespace

void RotorGeometry::validate() const {
  for (const auto& r : rotors) {
    if (!r.position.allFinite() || !r.direction.allFinite() ||
        !std::isfinite(r.kappa)) {
      throw std::invalid_argument("RotorGeometry: non-finite entries");
    }
    if (std::abs(r.direction.norm() - 1.0) > 1e-12) {
      throw std::invalid_argument(
          "RotorGeometry: thrust directions must be unit vectors");
    }
    if (!(r.f_max > 0.0)) {
      throw std::invalid_argument("RotorGeometry: f_max must be positive");
    }
  }
}

Vec8 RotorGeometry::thrust_limits() const {
  Vec8 lim;
  for (int i = 0; i < 8; ++i) lim(i) = rotors[i].f_max;
  return lim;
}

RotorGeometry default_geometry() {
  constexpr double kHalfEdge = 0.2;
  constexpr double kTilt = 0.5;
  constexpr double kKappa = 0.016;
  constexpr double kFmax = 6.0;

  RotorGeometry geom;
  int idx = 0;
  for (int sx : {1, -1}) {
    for (int sy : {1, -1}) {
      for (int sz : {1, -1}) {
        const Vec3 vertex(static_cast<double>(sx), static_cast<double>(sy),
                          static_cast<double>(sz));
        const Vec3 diag = vertex / std::sqrt(3.0);
        const Vec3 azimuthal =
            Vec3(static_cast<double>(sy), static_cast<double>(-sx), 0.0) /
            std::sqrt(2.0);
        Vec3 dir = diag + kTilt * (sx * sy) * azimuthal;
        dir.normalize();
        geom.rotors[idx++] = {kHalfEdge * vertex, dir,
                              kKappa * (sx * sy * sz), kFmax};
      }
    }
  }
  return geom;
}

AllocationMatrix build_allocation(const RotorGeometry& geom) {
  geom.validate();

  AllocationMatrix alloc;
  for (int i = 0; i < 8; ++i) {
    const auto& r = geom.rotors[i];
    alloc.A.col(i).head<3>() = r.direction;
    alloc.A.col(i).tail<3>() =
        r.position.cross(r.direction) + r.kappa * r.direction;
  }
  alloc.u_max = geom.thrust_limits();

  Eigen::JacobiSVD<Mat68> svd(alloc.A,
                              Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(5) <= kRankTol * sv(0)) {
    throw GeometryRankError("build_allocation: allocation matrix rank < 6");
  }
  // Right singular vectors of the two zero singular values span null(A).
  alloc.nullspace = svd.matrixV().rightCols<2>();
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 8; ++i) {
      if (std::abs(alloc.nullspace(i, c)) > 1e-9) {
        if (alloc.nullspace(i, c) < 0.0) alloc.nullspace.col(c) *= -1.0;
        break;
      }
    }
  }

  auto pinv3 = [](const Mat38& m) -> Mat83 {
    Eigen::JacobiSVD<Mat38> s(m, Eigen::ComputeFullU | Eigen::ComputeThinV);
    if (s.singularValues()(2) <= kRankTol * s.singularValues()(0)) {
      throw GeometryRankError("build_allocation: sub-block rank < 3");
    }
    return s.solve(Mat3::Identity());
  };
  alloc.force_pinv = pinv3(alloc.A.topRows<3>());
  alloc.moment_pinv = pinv3(alloc.A.bottomRows<3>());
  return alloc;
}

Vec8 nominal_allocation(const AllocationMatrix& alloc, const Vec3& f_b_star,
                        const Vec3& tau_b_star) {
  return alloc.force_pinv * f_b_star + alloc.moment_pinv * tau_b_star;
}

Vec8 nominal_allocation_full(const AllocationMatrix& alloc,
                             const Vec6& wrench) {
  Eigen::JacobiSVD<Mat68> svd(alloc.A,
                              Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.solve(wrench);
}

Vec2 mbno_solve(const Vec8& u_0, const AllocationMatrix& alloc,
                const Vec8& u_min, const Vec8& u_max) {
  if (((u_max - u_min).array() < 0.0).any()) {
    throw std::invalid_argument("mbno_solve: u_min > u_max");
  }
  const Mat82& n_A = alloc.nullspace;
  const Vec2 q = n_A.transpose() * u_0;
  const auto hp = box_halfplanes(u_0, n_A, u_min, u_max);

  const double scale = 1.0 + u_0.template lpNorm<Eigen::Infinity>() +
                       u_max.template lpNorm<Eigen::Infinity>();
  const double feas_tol = 1e-11 * scale;

  auto objective = [&](const Vec2& x) { return 0.5 * x.dot(x) + q.dot(x); };

  bool found = false;
  Vec2 best = Vec2::Zero();
  double best_obj = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec2& x) {
    if (!x.allFinite()) return;
    if (max_violation(hp, x) > feas_tol) return;
    const double obj = objective(x);
    if (!found || obj < best_obj) {
      found = true;
      best = x;
      best_obj = obj;
    }
  };

  // Unconstrained stationary point.
  consider(-q);
  // One active constraint: project the stationary point onto the plane.
  for (const auto& h : hp) {
    const double nn = h.a.squaredNorm();
    if (nn < 1e-20) continue;
    consider(-q + h.a * (h.b + h.a.dot(q)) / nn);
  }
  // Two active constraints: vertex of the pair.
  for (size_t i = 0; i < hp.size(); ++i) {
    for (size_t j = i + 1; j < hp.size(); ++j) {
      Eigen::Matrix2d M;
      M.row(0) = hp[i].a.transpose();
      M.row(1) = hp[j].a.transpose();
      if (std::abs(M.determinant()) < 1e-12) continue;
      consider(M.fullPivLu().solve(Vec2(hp[i].b, hp[j].b)));
    }
  }

  if (!found) {
    const Vec2 diag = least_max_violation(hp);
    throw InfeasibleAllocation(diag, max_violation(hp, diag));
  }

  // Tiny inward repair so the returned point satisfies the bounds with no
  // tolerance; the objective change is O(feas_tol).
  for (int pass = 0; pass < 4; ++pass) {
    std::vector<int> violated;
    for (size_t i = 0; i < hp.size(); ++i) {
      if (hp[i].a.dot(best) - hp[i].b > 0.0) violated.push_back((int)i);
    }
    if (violated.empty()) break;
    const double margin = 1e-12 * scale;
    if (violated.size() == 1) {
      const auto& h = hp[violated[0]];
      best -= h.a * (h.a.dot(best) - h.b + margin) / h.a.squaredNorm();
    } else {
      Eigen::MatrixXd Av(violated.size(), 2);
      Eigen::VectorXd rhs(violated.size());
      for (size_t k = 0; k < violated.size(); ++k) {
        Av.row(k) = hp[violated[k]].a.transpose();
        rhs(k) = -(Av.row(k).dot(best) - hp[violated[k]].b + margin);
      }
      best += Av.completeOrthogonalDecomposition().solve(rhs);
    }
  }
  return best;
}

}  // namespace omni
