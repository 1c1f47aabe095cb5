#include "cwm/caloric_gauge.hpp"

#include "cwm/parallel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace cwm::gauge {

namespace {

using geom::mink_inner;

using ConstFrame = Eigen::Map<const MatrixXd>;
using Frame = Eigen::Map<MatrixXd>;

ConstFrame frame_at(const MatrixXd& e, int dim, int m, Eigen::Index c) {
  return ConstFrame(e.data() + c * e.rows(), dim, m);
}

Frame frame_at(MatrixXd& e, int dim, int m, Eigen::Index c) {
  return Frame(e.data() + c * e.rows(), dim, m);
}

// Three-point derivative on a non-uniform s-grid (second order).
MatrixXd s_derivative(const MatrixXd& fm, const MatrixXd& f0, const MatrixXd& fp,
                      double a, double b) {
  return (-b / (a * (a + b))) * fm + ((b - a) / (a * b)) * f0 +
         (a / (b * (a + b))) * fp;
}

// Least-squares exponential fit over the trailing levels; returns the
// integral tail estimate g(s_K) / q for decay rate q, or a crude bound when
// no decay is measured.
double tail_estimate(const std::vector<double>& s, const std::vector<double>& g) {
  const int K = static_cast<int>(s.size());
  std::vector<double> xs, ys;
  for (int k = std::max(0, K - 5); k < K; ++k)
    if (g[k] > 1e-300) {
      xs.push_back(s[k]);
      ys.push_back(std::log(g[k]));
    }
  if (g.back() <= 1e-300) return 0.0;
  if (xs.size() < 2) return g.back() * s.back();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  const double q = -slope;
  if (q <= 1e-12) return g.back() * s.back();  // no decay measured
  return g.back() / q;
}

}  // namespace

FrameField transport_frame(const HeatLadder& ladder, const VectorXd& phi_inf,
                           const MatrixXd& e_seed) {
  const auto& tc = ladder.target;
  const int m = tc.m;
  const int dim = tc.ambient_dim();
  const int N = ladder.grid.num_nodes();
  const int K = ladder.levels();

  FrameField ff;
  ff.grid = ladder.grid;
  ff.target = tc;
  ff.phi_infinity = phi_inf;
  ff.e_infinity = e_seed;
  ff.e.assign(K, MatrixXd(dim * m, N));

  // Seed at s_max: geodesic transport from phi_inf, re-orthonormalized.
  {
    const MatrixXd& phiK = ladder.phi[K - 1];
    MatrixXd& eK = ff.e[K - 1];
    for (int c = 0; c < N; ++c) {
      MatrixXd raw(dim, m);
      for (int i = 0; i < m; ++i)
        raw.col(i) = geom::parallel_transport(tc, phi_inf, phiK.col(c), e_seed.col(i));
      frame_at(eK, dim, m, c) = geom::orthonormalize(tc, phiK.col(c), raw);
    }
  }

  // Backward sweep: discrete nabla_s e = 0 via exact geodesic transport.
  ff.step_residual.assign(std::max(0, K - 1), 0.0);
  for (int k = K - 2; k >= 0; --k) {
    const MatrixXd& phi_hi = ladder.phi[k + 1];
    const MatrixXd& phi_lo = ladder.phi[k];
    const MatrixXd& e_hi = ff.e[k + 1];
    MatrixXd& e_lo = ff.e[k];
    std::vector<double> chunk_max((N + 2047) / 2048, 0.0);
    par::parallel_for(N, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
      double res = 0.0;
      for (int c = static_cast<int>(lo); c < static_cast<int>(hi); ++c) {
        auto src = frame_at(e_hi, dim, m, c);
        auto dst = frame_at(e_lo, dim, m, c);
        for (int i = 0; i < m; ++i)
          dst.col(i) = geom::parallel_transport(tc, phi_hi.col(c),
                                                phi_lo.col(c), src.col(i));
        // A_s surrogate: tangential part of the s-difference of the frame.
        for (int j = 0; j < m; ++j) {
          VectorXd d = geom::project_tangent(phi_lo.col(c),
                                             (src.col(j) - dst.col(j)).eval());
          for (int i = 0; i < m; ++i)
            res = std::max(res, std::abs(mink_inner(d, dst.col(i))));
        }
      }
      chunk_max[lo / 2048] = res;
    });
    ff.step_residual[k] = *std::max_element(chunk_max.begin(), chunk_max.end());
  }
  return ff;
}

GaugeFieldSet extract_fields(const HeatLadder& ladder, const FrameField& frames) {
  const auto& tc = ladder.target;
  const int m = tc.m;
  const int dim = tc.ambient_dim();
  const int N = ladder.grid.num_nodes();
  const Grid2D& g = ladder.grid;

  GaugeFieldSet out;
  out.grid = g;
  out.target = tc;
  out.s_levels = ladder.s_levels;
  out.levels.resize(ladder.levels());

  for (int k = 0; k < ladder.levels(); ++k) {
    const MatrixXd& phi = ladder.phi[k];
    const MatrixXd& e = frames.e[k];
    GaugeLevel& lvl = out.levels[k];

    auto project_components = [&](const MatrixXd& ambient) {
      MatrixXd psi(m, N);
      par::parallel_for(N, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
        for (int c = static_cast<int>(lo); c < static_cast<int>(hi); ++c) {
          auto E = frame_at(e, dim, m, c);
          for (int i = 0; i < m; ++i)
            psi(i, c) = mink_inner(ambient.col(c), E.col(i));
        }
      });
      return psi;
    };

    MatrixXd d1 = grid::central_diff(phi, g, 0);
    MatrixXd d2 = grid::central_diff(phi, g, 1);
    geom::project_tangent_cols(phi, d1);
    geom::project_tangent_cols(phi, d2);
    lvl.psi_x1 = project_components(d1);
    lvl.psi_x2 = project_components(d2);
    lvl.psi_t = project_components(ladder.dphi_dt[k]);
    lvl.psi_s = project_components(ladder.dphi_ds[k]);

    auto connection = [&](int axis) {
      const MatrixXd de = grid::central_diff(e, g, axis);
      MatrixXd A(m * m, N);
      par::parallel_for(N, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
        for (int c = static_cast<int>(lo); c < static_cast<int>(hi); ++c) {
          auto E = frame_at(e, dim, m, c);
          auto D = frame_at(de, dim, m, c);
          Eigen::Map<MatrixXd> Ac(A.data() + c * m * m, m, m);
          for (int j = 0; j < m; ++j) {
            const VectorXd pd =
                geom::project_tangent(phi.col(c), VectorXd(D.col(j)));
            for (int i = 0; i < m; ++i) Ac(i, j) = mink_inner(pd, E.col(i));
          }
          Ac = 0.5 * (Ac - Ac.transpose()).eval();
        }
      });
      return A;
    };
    lvl.A_x1 = connection(0);
    lvl.A_x2 = connection(1);
  }
  return out;
}

void gauge_transform(GaugeFieldSet& fields, FrameField& frames, const MatrixXd& U) {
  const int m = fields.target.m;
  const int dim = fields.target.ambient_dim();
  const int N = fields.grid.num_nodes();
  const bool broadcast = (U.rows() == m && U.cols() == m);
  if (!broadcast && !(U.rows() == m * m && U.cols() == N))
    throw ShapeMismatch("gauge_transform: U must be m x m or m^2 x N");

  auto Uat = [&](Eigen::Index c) {
    return broadcast ? ConstFrame(U.data(), m, m)
                     : ConstFrame(U.data() + c * m * m, m, m);
  };
  for (int c = 0; c < (broadcast ? 1 : N); ++c) {
    const MatrixXd UUt = Uat(c) * Uat(c).transpose();
    if ((UUt - MatrixXd::Identity(m, m)).norm() > 1e-10)
      throw NotOrthogonal("gauge_transform: U is not orthogonal");
  }

  // Flattened U field for spatial differentiation of the A-transform.
  MatrixXd Ufield;
  if (broadcast) {
    Ufield.resize(m * m, N);
    for (int c = 0; c < N; ++c)
      Eigen::Map<MatrixXd>(Ufield.data() + c * m * m, m, m) = Uat(0);
  } else {
    Ufield = U;
  }
  const MatrixXd dU1 = grid::central_diff(Ufield, fields.grid, 0);
  const MatrixXd dU2 = grid::central_diff(Ufield, fields.grid, 1);

  for (std::size_t k = 0; k < fields.levels.size(); ++k) {
    GaugeLevel& lvl = fields.levels[k];
    MatrixXd& e = frames.e[k];
    for (int c = 0; c < N; ++c) {
      auto Uc = ConstFrame(Ufield.data() + c * m * m, m, m);
      auto E = frame_at(e, dim, m, c);
      E = (E * Uc.transpose()).eval();  // e -> e U^{-1}

      auto rot = [&](MatrixXd& psi) {
        psi.col(c) = (Uc * psi.col(c)).eval();
      };
      rot(lvl.psi_t);
      rot(lvl.psi_x1);
      rot(lvl.psi_x2);
      rot(lvl.psi_s);

      auto conj = [&](MatrixXd& A, const MatrixXd& dU) {
        Eigen::Map<MatrixXd> Ac(A.data() + c * m * m, m, m);
        ConstFrame dUc(dU.data() + c * m * m, m, m);
        Ac = (Uc * Ac * Uc.transpose() + dUc * Uc.transpose()).eval();
      };
      conj(lvl.A_x1, dU1);
      conj(lvl.A_x2, dU2);
      if (lvl.has_A_t()) {
        // s-independent U(t,x) with no t-variation in our action: pure
        // conjugation.
        Eigen::Map<MatrixXd> Ac(lvl.A_t.data() + c * m * m, m, m);
        Ac = (Uc * Ac * Uc.transpose()).eval();
      }
    }
  }
}

MatrixXd wedge(const VectorXd& u, const VectorXd& v) {
  return u * v.transpose() - v * u.transpose();
}

MatrixXd wedge_cols(const MatrixXd& u, const MatrixXd& v) {
  const int m = static_cast<int>(u.rows());
  MatrixXd out(m * m, u.cols());
  for (Eigen::Index c = 0; c < u.cols(); ++c)
    Eigen::Map<MatrixXd>(out.data() + c * m * m, m, m) =
        u.col(c) * v.col(c).transpose() - v.col(c) * u.col(c).transpose();
  return out;
}

MatrixXd apply_cols(const MatrixXd& A, const MatrixXd& v) {
  const int m = static_cast<int>(v.rows());
  MatrixXd out(m, v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    out.col(c) = ConstFrame(A.data() + c * m * m, m, m) * v.col(c);
  return out;
}

MatrixXd commutator_cols(const MatrixXd& A, const MatrixXd& B) {
  const int mm = static_cast<int>(A.rows());
  const int m = static_cast<int>(std::lround(std::sqrt(double(mm))));
  MatrixXd out(mm, A.cols());
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    ConstFrame Ac(A.data() + c * mm, m, m);
    ConstFrame Bc(B.data() + c * mm, m, m);
    Eigen::Map<MatrixXd>(out.data() + c * mm, m, m) = Ac * Bc - Bc * Ac;
  }
  return out;
}

NormPair field_norms(const Grid2D& g, const MatrixXd& f) {
  const VectorXd sq = f.colwise().squaredNorm().transpose();
  NormPair np;
  np.sup = std::sqrt(std::max(0.0, sq.maxCoeff()));
  np.l2 = std::sqrt(std::max(0.0, grid::integrate(g, sq)));
  return np;
}

GaugeBundle build_gauge_bundle(const std::vector<MapField>& slices, double dt,
                               const HeatConfig& cfg) {
  if (slices.empty()) throw ValidationError("build_gauge_bundle: no slices");
  GaugeBundle b;
  b.dt = dt;
  b.center = static_cast<int>(slices.size()) / 2;

  heat::HeatLadder center_ladder = heat::build_ladder(slices[b.center], cfg);
  const std::vector<double> s_levels = center_ladder.s_levels;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    b.times.push_back(slices[i].t);
    if (static_cast<int>(i) == b.center)
      b.ladders.push_back(std::move(center_ladder));
    else
      b.ladders.push_back(
          heat::build_ladder_fixed(slices[i], s_levels, cfg.stability_factor));
  }

  const VectorXd phi_inf = b.ladders[b.center].phi_infinity;
  const MatrixXd e_seed = geom::standard_frame(slices[0].target, phi_inf);
  for (const auto& lad : b.ladders) {
    b.frames.push_back(transport_frame(lad, phi_inf, e_seed));
    b.fields.push_back(extract_fields(lad, b.frames.back()));
  }

  // A_t on interior slices from the frame t-derivative.
  const auto& tc = slices[0].target;
  const int m = tc.m;
  const int dim = tc.ambient_dim();
  const int N = slices[0].grid.num_nodes();
  for (std::size_t i = 1; i + 1 < slices.size(); ++i) {
    for (std::size_t k = 0; k < s_levels.size(); ++k) {
      const MatrixXd dte = (b.frames[i + 1].e[k] - b.frames[i - 1].e[k]) / (2.0 * dt);
      const MatrixXd& phi = b.ladders[i].phi[k];
      const MatrixXd& e = b.frames[i].e[k];
      MatrixXd At(m * m, N);
      for (int c = 0; c < N; ++c) {
        auto E = frame_at(e, dim, m, c);
        auto D = frame_at(dte, dim, m, c);
        Eigen::Map<MatrixXd> Ac(At.data() + c * m * m, m, m);
        for (int j = 0; j < m; ++j) {
          const VectorXd pd = geom::project_tangent(phi.col(c), VectorXd(D.col(j)));
          for (int a = 0; a < m; ++a) Ac(a, j) = mink_inner(pd, E.col(a));
        }
        Ac = 0.5 * (Ac - Ac.transpose()).eval();
      }
      b.fields[i].levels[k].A_t = std::move(At);
    }
  }
  return b;
}

MatrixXd psi_component(const GaugeFieldSet& f, int k, int alpha) {
  const GaugeLevel& lvl = f.levels[k];
  switch (alpha) {
    case 0: return lvl.psi_t;
    case 1: return lvl.psi_x1;
    case 2: return lvl.psi_x2;
    default: throw ValidationError("psi_component: alpha out of range");
  }
}

MatrixXd A_component(const GaugeFieldSet& f, int k, int alpha) {
  const GaugeLevel& lvl = f.levels[k];
  switch (alpha) {
    case 0:
      if (!lvl.has_A_t())
        throw GridMismatch("A_t unavailable: slice is not interior to a bundle");
      return lvl.A_t;
    case 1: return lvl.A_x1;
    case 2: return lvl.A_x2;
    default: throw ValidationError("A_component: alpha out of range");
  }
}

MatrixXd covariant_psi(const GaugeBundle& b, int k, int alpha, int beta) {
  const GaugeFieldSet& f = b.fields[b.center];
  const MatrixXd psi_b = psi_component(f, k, beta);
  MatrixXd dpsi;
  if (alpha == 0) {
    dpsi = (psi_component(b.fields[b.center + 1], k, beta) -
            psi_component(b.fields[b.center - 1], k, beta)) /
           (2.0 * b.dt);
  } else {
    dpsi = grid::central_diff(psi_b, f.grid, alpha - 1);
  }
  return dpsi + apply_cols(A_component(f, k, alpha), psi_b);
}

namespace {

// D_alpha applied to an arbitrary m x N field living on the center slice.
MatrixXd covariant_vec(const GaugeBundle& b, int k, int alpha, const MatrixXd& v) {
  if (alpha == 0)
    throw ValidationError("covariant_vec: spatial directions only");
  const GaugeFieldSet& f = b.fields[b.center];
  return grid::central_diff(v, f.grid, alpha - 1) +
         apply_cols(A_component(f, k, alpha), v);
}

// Sum_j D_j D_j v on the center slice at level k.
MatrixXd covariant_laplacian(const GaugeBundle& b, int k, const MatrixXd& v) {
  MatrixXd out = covariant_vec(b, k, 1, covariant_vec(b, k, 1, v));
  out += covariant_vec(b, k, 2, covariant_vec(b, k, 2, v));
  return out;
}

// kappa (v ^ psi_j) psi_j summed over spatial j.
MatrixXd curvature_term(const GaugeBundle& b, int k, const MatrixXd& v) {
  const GaugeFieldSet& f = b.fields[b.center];
  MatrixXd out = apply_cols(wedge_cols(v, f.levels[k].psi_x1), f.levels[k].psi_x1);
  out += apply_cols(wedge_cols(v, f.levels[k].psi_x2), f.levels[k].psi_x2);
  return f.target.kappa * out;
}

}  // namespace

std::map<std::string, NormPair> torsion_residual(const GaugeBundle& b, int k) {
  std::map<std::string, NormPair> out;
  const Grid2D& g = b.fields[b.center].grid;
  const std::pair<int, int> pairs[] = {{0, 1}, {0, 2}, {1, 2}};
  for (auto [a, bb] : pairs) {
    const MatrixXd r = covariant_psi(b, k, a, bb) - covariant_psi(b, k, bb, a);
    out[std::to_string(a) + std::to_string(bb)] = field_norms(g, r);
  }
  return out;
}

MatrixXd curvature_F(const GaugeBundle& b, int k, int alpha, int beta) {
  const GaugeFieldSet& f = b.fields[b.center];
  const MatrixXd Ab = A_component(f, k, beta);
  const MatrixXd Aa = A_component(f, k, alpha);
  MatrixXd dAb, dAa;
  if (alpha == 0)
    dAb = (A_component(b.fields[b.center + 1], k, beta) -
           A_component(b.fields[b.center - 1], k, beta)) /
          (2.0 * b.dt);
  else
    dAb = grid::central_diff(Ab, f.grid, alpha - 1);
  if (beta == 0)
    dAa = (A_component(b.fields[b.center + 1], k, alpha) -
           A_component(b.fields[b.center - 1], k, alpha)) /
          (2.0 * b.dt);
  else
    dAa = grid::central_diff(Aa, f.grid, beta - 1);
  return dAb - dAa + commutator_cols(Aa, Ab);
}

std::map<std::string, NormPair> curvature_residual(const GaugeBundle& b, int k) {
  std::map<std::string, NormPair> out;
  const GaugeFieldSet& f = b.fields[b.center];
  const std::pair<int, int> pairs[] = {{0, 1}, {0, 2}, {1, 2}};
  for (auto [a, bb] : pairs) {
    const MatrixXd F = curvature_F(b, k, a, bb);
    const MatrixXd target =
        f.target.kappa *
        wedge_cols(psi_component(f, k, a), psi_component(f, k, bb));
    out[std::to_string(a) + std::to_string(bb)] = field_norms(f.grid, F - target);
  }
  return out;
}

TensionFields tension_fields(const GaugeBundle& b, int k) {
  const GaugeFieldSet& f = b.fields[b.center];
  TensionFields tf;
  tf.psi_s_check = covariant_psi(b, k, 1, 1) + covariant_psi(b, k, 2, 2);
  tf.psi_s_residual = field_norms(f.grid, tf.psi_s_check - f.levels[k].psi_s);
  tf.u = tf.psi_s_check - covariant_psi(b, k, 0, 0);
  tf.u_norm = field_norms(f.grid, tf.u);
  return tf;
}

AReconstruction reconstruct_A(const GaugeBundle& b, int alpha, double tail_tol) {
  const GaugeFieldSet& f = b.fields[b.center];
  const int K = static_cast<int>(f.s_levels.size());
  const double mkappa = -f.target.kappa;

  std::vector<MatrixXd> W(K);  // psi_s ^ psi_alpha per level
  std::vector<double> wsup(K);
  for (int k = 0; k < K; ++k) {
    W[k] = wedge_cols(f.levels[k].psi_s, psi_component(f, k, alpha));
    wsup[k] = field_norms(f.grid, W[k]).sup;
  }

  AReconstruction rec;
  rec.A.resize(K);
  rec.A[K - 1] = MatrixXd::Zero(W[0].rows(), W[0].cols());
  for (int k = K - 2; k >= 0; --k)
    rec.A[k] = rec.A[k + 1] + (0.5 * mkappa * (f.s_levels[k + 1] - f.s_levels[k])) *
                                  (W[k] + W[k + 1]);

  rec.tail_bound = mkappa * tail_estimate(f.s_levels, wsup);
  const MatrixXd A0 = A_component(f, 0, alpha);
  rec.residual = field_norms(f.grid, rec.A[0] - A0);
  const double scale = std::max(field_norms(f.grid, A0).sup, 1e-30);
  if (rec.tail_bound > tail_tol * scale && rec.tail_bound > 1e-14)
    throw TailTooLarge("reconstruct_A: s_max truncation tail exceeds tolerance");
  return rec;
}

PsiReconstruction reconstruct_psi(const GaugeBundle& b, int alpha, double tail_tol) {
  const GaugeFieldSet& f = b.fields[b.center];
  const int K = static_cast<int>(f.s_levels.size());

  // I(s_k) = int_{s_k}^{s_max} psi_s ds, cumulative trapezoid from the top;
  // needed at the center and (for alpha = 0) at the t-neighbors.
  auto cumulative = [&](const GaugeFieldSet& ff) {
    std::vector<MatrixXd> I(K);
    I[K - 1] = MatrixXd::Zero(ff.levels[0].psi_s.rows(), ff.levels[0].psi_s.cols());
    for (int k = K - 2; k >= 0; --k)
      I[k] = I[k + 1] + (0.5 * (ff.s_levels[k + 1] - ff.s_levels[k])) *
                            (ff.levels[k].psi_s + ff.levels[k + 1].psi_s);
    return I;
  };
  const std::vector<MatrixXd> I = cumulative(f);

  MatrixXd dI;
  if (alpha == 0) {
    const std::vector<MatrixXd> Ip = cumulative(b.fields[b.center + 1]);
    const std::vector<MatrixXd> Im = cumulative(b.fields[b.center - 1]);
    dI = (Ip[0] - Im[0]) / (2.0 * b.dt);
  } else {
    dI = grid::central_diff(I[0], f.grid, alpha - 1);
  }

  // Psi_alpha(0) = -int_0^{s_max} A_alpha psi_s ds, from integrating
  // d_s psi_alpha = d_alpha psi_s + A_alpha psi_s down from s_max.
  MatrixXd Psi = MatrixXd::Zero(f.levels[0].psi_s.rows(), f.levels[0].psi_s.cols());
  std::vector<double> gsup(K);
  for (int k = 0; k < K; ++k) {
    const MatrixXd integrand =
        apply_cols(A_component(f, k, alpha), f.levels[k].psi_s);
    if (k > 0)
      Psi += (0.5 * (f.s_levels[k] - f.s_levels[k - 1])) * integrand;
    if (k + 1 < K)
      Psi += (0.5 * (f.s_levels[k + 1] - f.s_levels[k])) * integrand;
    gsup[k] = field_norms(f.grid, f.levels[k].psi_s).sup;
  }

  PsiReconstruction rec;
  rec.psi = -dI - Psi;
  rec.Psi_correction = -Psi;
  const MatrixXd psi0 = psi_component(f, 0, alpha);
  rec.residual = field_norms(f.grid, rec.psi - psi0);
  rec.correction_ratio =
      field_norms(f.grid, Psi).l2 / std::max(field_norms(f.grid, psi0).l2, 1e-300);
  rec.tail_bound = tail_estimate(f.s_levels, gsup);
  const double scale = std::max(field_norms(f.grid, psi0).sup, 1e-30);
  if (rec.tail_bound > tail_tol * scale && rec.tail_bound > 1e-14)
    throw TailTooLarge("reconstruct_psi: s_max truncation tail exceeds tolerance");
  return rec;
}

std::map<std::string, NormPair> evolution_residuals(const GaugeBundle& b, int k) {
  const GaugeFieldSet& f = b.fields[b.center];
  const int K = static_cast<int>(f.s_levels.size());
  if (k < 1 || k + 1 >= K)
    throw ValidationError("evolution_residuals: interior s-level required");
  const Grid2D& g = f.grid;
  const double kappa = f.target.kappa;
  const double a = f.s_levels[k] - f.s_levels[k - 1];
  const double bb = f.s_levels[k + 1] - f.s_levels[k];

  std::map<std::string, NormPair> out;

  // d_s psi_alpha = D_k D_k psi_alpha + kappa (psi_alpha ^ psi_j) psi_j.
  const char* names[] = {"psij_t", "psij_x1", "psij_x2"};
  for (int alpha = 0; alpha < 3; ++alpha) {
    const MatrixXd ds = s_derivative(psi_component(f, k - 1, alpha),
                                     psi_component(f, k, alpha),
                                     psi_component(f, k + 1, alpha), a, bb);
    const MatrixXd psi = psi_component(f, k, alpha);
    const MatrixXd rhs = covariant_laplacian(b, k, psi) + curvature_term(b, k, psi);
    out[names[alpha]] = field_norms(g, ds - rhs);
  }

  // Same equation for the heat-tension field.
  {
    const MatrixXd ds = s_derivative(f.levels[k - 1].psi_s, f.levels[k].psi_s,
                                     f.levels[k + 1].psi_s, a, bb);
    const MatrixXd rhs = covariant_laplacian(b, k, f.levels[k].psi_s) +
                         curvature_term(b, k, f.levels[k].psi_s);
    out["psis_heat"] = field_norms(g, ds - rhs);
  }

  // Wave-tension: d_s u = D_k D_k u + kappa (u ^ psi_j) psi_j
  //                      + 4 kappa (psi_alpha ^ psi_j) D_j psi^alpha.
  {
    const MatrixXd um = tension_fields(b, k - 1).u;
    const MatrixXd u0 = tension_fields(b, k).u;
    const MatrixXd up = tension_fields(b, k + 1).u;
    const MatrixXd ds = s_derivative(um, u0, up, a, bb);
    MatrixXd cross = MatrixXd::Zero(u0.rows(), u0.cols());
    for (int j = 1; j <= 2; ++j)
      for (int alpha = 0; alpha < 3; ++alpha) {
        const double sgn = (alpha == 0) ? -1.0 : 1.0;  // index raising
        cross += sgn * apply_cols(wedge_cols(psi_component(f, k, alpha),
                                             psi_component(f, k, j)),
                                  covariant_psi(b, k, j, alpha));
      }
    const MatrixXd rhs = covariant_laplacian(b, k, u0) + curvature_term(b, k, u0) +
                         4.0 * kappa * cross;
    out["u_heat"] = field_norms(g, ds - rhs);
  }

  // Wave equation in t for psi_s:
  // -d_tt psi_s + Lap psi_s = d_s u - d_s(A^a psi_a) - d^a(A_a psi_s).
  {
    const GaugeFieldSet& fp = b.fields[b.center + 1];
    const GaugeFieldSet& fm = b.fields[b.center - 1];
    if (!fp.levels[k].has_A_t() || !fm.levels[k].has_A_t())
      throw GridMismatch("psis_wave requires a bundle of width >= 5");
    const MatrixXd dtt = (fp.levels[k].psi_s - 2.0 * f.levels[k].psi_s +
                          fm.levels[k].psi_s) /
                         (b.dt * b.dt);
    const MatrixXd lhs = -dtt + grid::laplacian(f.levels[k].psi_s, g);

    const MatrixXd um = tension_fields(b, k - 1).u;
    const MatrixXd u0 = tension_fields(b, k).u;
    const MatrixXd up = tension_fields(b, k + 1).u;
    const MatrixXd dsu = s_derivative(um, u0, up, a, bb);

    auto A_contract = [&](const GaugeFieldSet& ff, int lev) {
      // A^alpha psi_alpha = -A_t psi_t + A_1 psi_1 + A_2 psi_2.
      MatrixXd r = -apply_cols(A_component(ff, lev, 0), ff.levels[lev].psi_t);
      r += apply_cols(ff.levels[lev].A_x1, ff.levels[lev].psi_x1);
      r += apply_cols(ff.levels[lev].A_x2, ff.levels[lev].psi_x2);
      return r;
    };
    const MatrixXd dsAp = s_derivative(A_contract(f, k - 1), A_contract(f, k),
                                       A_contract(f, k + 1), a, bb);

    const MatrixXd Atps_p = apply_cols(A_component(fp, k, 0), fp.levels[k].psi_s);
    const MatrixXd Atps_m = apply_cols(A_component(fm, k, 0), fm.levels[k].psi_s);
    MatrixXd div = -(Atps_p - Atps_m) / (2.0 * b.dt);
    div += grid::central_diff(
        apply_cols(f.levels[k].A_x1, f.levels[k].psi_s), g, 0);
    div += grid::central_diff(
        apply_cols(f.levels[k].A_x2, f.levels[k].psi_s), g, 1);

    out["psis_wave"] = field_norms(g, lhs - (dsu - dsAp - div));
  }

  return out;
}

MapReconstruction reconstruct_map(const GaugeBundle& b) {
  const GaugeFieldSet& f = b.fields[b.center];
  const HeatLadder& lad = b.ladders[b.center];
  const auto& tc = f.target;
  const int m = tc.m;
  const int dim = tc.ambient_dim();
  const Grid2D& g = f.grid;
  const int n = g.n;
  const double h = g.h;

  const MatrixXd& psi1 = f.levels[0].psi_x1;
  const MatrixXd& psi2 = f.levels[0].psi_x2;
  const MatrixXd& A1 = f.levels[0].A_x1;
  const MatrixXd& A2 = f.levels[0].A_x2;
  const MatrixXd& phi0 = lad.phi[0];
  const MatrixXd& e0 = b.frames[b.center].e[0];

  // One first-order transport step from node c along axis `axis`.
  auto step = [&](const VectorXd& p, const MatrixXd& E, int c, int axis,
                  VectorXd& p_out, MatrixXd& E_out) {
    const MatrixXd& psi = (axis == 0) ? psi1 : psi2;
    const MatrixXd& A = (axis == 0) ? A1 : A2;
    const VectorXd v = E * psi.col(c);
    p_out = geom::geodesic_exp(tc, p, h * v);
    const MatrixXd R =
        (h * Eigen::Map<const MatrixXd>(A.data() + c * m * m, m, m)).exp();
    const MatrixXd rotated = E * R;
    E_out.resize(dim, m);
    for (int i = 0; i < m; ++i)
      E_out.col(i) = geom::parallel_transport(tc, p, p_out, rotated.col(i));
  };

  auto sweep = [&](bool row_first) {
    MatrixXd phi(dim, g.num_nodes());
    VectorXd p = phi0.col(0);
    MatrixXd E = frame_at(e0, dim, m, 0);
    phi.col(0) = p;
    std::vector<MatrixXd> spine_frames(n);
    std::vector<VectorXd> spine_points(n);
    spine_points[0] = p;
    spine_frames[0] = E;
    const int spine_axis = row_first ? 0 : 1;
    for (int i = 1; i < n; ++i) {
      const int c_prev = row_first ? (i - 1) : n * (i - 1);
      VectorXd pn;
      MatrixXd En;
      step(spine_points[i - 1], spine_frames[i - 1], c_prev, spine_axis, pn, En);
      spine_points[i] = pn;
      spine_frames[i] = En;
      phi.col(row_first ? i : n * i) = pn;
    }
    const int cross_axis = row_first ? 1 : 0;
    for (int i = 0; i < n; ++i) {
      VectorXd p2 = spine_points[i];
      MatrixXd E2 = spine_frames[i];
      for (int j = 1; j < n; ++j) {
        const int c_prev = row_first ? (i + n * (j - 1)) : ((j - 1) + n * i);
        VectorXd pn;
        MatrixXd En;
        step(p2, E2, c_prev, cross_axis, pn, En);
        p2 = pn;
        E2 = En;
        phi.col(row_first ? (i + n * j) : (j + n * i)) = p2;
      }
    }
    return phi;
  };

  MapReconstruction rec;
  rec.phi = sweep(true);
  const MatrixXd phi_cf = sweep(false);
  double disc = 0.0, pd = 0.0;
  for (int c = 0; c < g.num_nodes(); ++c) {
    disc = std::max(disc, geom::distance(tc, rec.phi.col(c), phi0.col(c)));
    pd = std::max(pd, geom::distance(tc, rec.phi.col(c), phi_cf.col(c)));
  }
  rec.discrepancy = disc;
  rec.path_dependence = pd;
  return rec;
}

}  // namespace cwm::gauge
