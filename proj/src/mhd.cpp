#include "mhdvem/mhd.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "mhdvem/errors.hpp"
#include "mhdvem/parallel.hpp"

namespace mhdvem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

Eigen::SparseMatrix<double> assemble_symmetric_global(
    const Discretization& disc, long dim,
    const std::function<const Eigen::MatrixXd&(int)>& local,
    const std::function<long(int, int)>& dof) {
  Triplets trip;
  for (int c = 0; c < disc.mesh.n_cells(); ++c) {
    const Eigen::MatrixXd& K = local(c);
    for (int i = 0; i < K.rows(); ++i)
      for (int j = 0; j < K.cols(); ++j)
        if (K(i, j) != 0.0) trip.emplace_back(dof(c, i), dof(c, j), K(i, j));
  }
  Eigen::SparseMatrix<double> mat(dim, dim);
  mat.setFromTriplets(trip.begin(), trip.end());
  return mat;
}

}  // namespace

Discretization::Discretization(PolyMesh mesh_in, int threads_in)
    : mesh(std::move(mesh_in)), threads(std::max(1, threads_in)) {
  geom = MeshGeometry::compute(mesh);
  tags = classify_boundary(mesh);
  layout = DofLayout::build(mesh, tags);
  ops = build_all_element_operators(mesh, geom, threads);
  forms.resize(mesh.n_cells());
  parallel_for(mesh.n_cells(), threads, [&](int c) { forms[c] = local_bilinear_forms(ops[c]); });

  const int nv = mesh.n_vertices();
  M_global = assemble_symmetric_global(
      *this, layout.n_velocity, [&](int c) -> const Eigen::MatrixXd& { return forms[c].M; },
      [&](int c, int i) -> long {
        const ElementOperators& op = ops[c];
        const int nvl = static_cast<int>(op.verts.size());
        return i < 3 * nvl ? 3l * op.verts[i / 3] + i % 3 : 3l * nv + op.faces[i - 3 * nvl];
      });
  Mface_global = assemble_symmetric_global(
      *this, layout.n_face, [&](int c) -> const Eigen::MatrixXd& { return forms[c].Mface; },
      [&](int c, int i) -> long { return ops[c].faces[i]; });
}

double Discretization::energy(const Eigen::VectorXd& u, const Eigen::VectorXd& B,
                              const PhysParams& pp) const {
  return u.dot(M_global * u) + B.dot(Mface_global * B) / pp.Rem;
}

namespace {

struct LocalIndexing {
  std::vector<long> vel, edge, face;  // local -> global dof ids
};

LocalIndexing local_indexing(const Discretization& disc, int c) {
  const ElementOperators& op = disc.ops[c];
  LocalIndexing ix;
  const long nv = disc.mesh.n_vertices();
  for (int v : op.verts)
    for (int comp = 0; comp < 3; ++comp) ix.vel.push_back(3l * v + comp);
  for (int f : op.faces) ix.vel.push_back(3l * nv + f);
  for (int e : op.edges) ix.edge.push_back(e);
  for (int f : op.faces) ix.face.push_back(f);
  return ix;
}

Eigen::VectorXd gather(const Eigen::VectorXd& global, const std::vector<long>& ids) {
  Eigen::VectorXd out(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) out[i] = global[ids[i]];
  return out;
}

// Dirichlet lift vectors: zero at interior dofs, boundary data elsewhere.
Eigen::VectorXd velocity_lift(const Discretization& disc, const SpaceTimeField& u_bc, double t) {
  Eigen::VectorXd lift = Eigen::VectorXd::Zero(disc.layout.n_velocity);
  if (!u_bc) return lift;
  const long nv = disc.mesh.n_vertices();
  for (int v : disc.tags.vertices) lift.segment<3>(3l * v) = u_bc(disc.mesh.vertices[v], t);
  for (int f : disc.tags.faces) {
    const Quadrature quad = face_quadrature(disc.mesh, disc.geom, f, 4);
    const Vec3 n = disc.geom.face[f].frame.n;
    lift[3l * nv + f] =
        quad.apply([&](const Vec3& x) { return u_bc(x, t).dot(n); }) / disc.geom.face[f].area;
  }
  return lift;
}

Eigen::VectorXd edge_lift(const Discretization& disc, const SpaceTimeField& E_bc, double t) {
  Eigen::VectorXd lift = Eigen::VectorXd::Zero(disc.layout.n_edge);
  if (!E_bc) return lift;
  std::vector<double> gn, gw;
  gauss_legendre_01(3, gn, gw);
  for (int e : disc.tags.edges) {
    const Vec3& a = disc.mesh.vertices[disc.mesh.edges[e][0]];
    const Vec3& b = disc.mesh.vertices[disc.mesh.edges[e][1]];
    double v = 0.0;
    for (size_t q = 0; q < gn.size(); ++q)
      v += gw[q] * E_bc(a + gn[q] * (b - a), t).dot(disc.geom.edge[e].tangent);
    lift[e] = v;
  }
  return lift;
}

Eigen::VectorXd face_lift(const Discretization& disc, const SpaceTimeField& B_bc, double t) {
  Eigen::VectorXd lift = Eigen::VectorXd::Zero(disc.layout.n_face);
  if (!B_bc) return lift;
  for (int f : disc.tags.faces) {
    const Quadrature quad = face_quadrature(disc.mesh, disc.geom, f, 4);
    const Vec3 n = disc.geom.face[f].frame.n;
    lift[f] =
        quad.apply([&](const Vec3& x) { return B_bc(x, t).dot(n); }) / disc.geom.face[f].area;
  }
  return lift;
}

}  // namespace

SparseSystem assemble_step(const Discretization& disc, const MhdState& state_n,
                           const MhdState& lag, double dt, const ProblemDef& problem,
                           const PhysParams& pp) {
  if (!(dt > 0)) throw ConfigError("assemble_step: dt must be positive");
  const DofLayout& L = disc.layout;
  const double t_next = state_n.t + dt;

  SparseSystem sys;
  sys.u_index.assign(L.n_velocity, -1);
  sys.E_index.assign(L.n_edge, -1);
  sys.B_index.assign(L.n_face, -1);
  long nu = 0, neq = 0, nb = 0;
  for (long i = 0; i < L.n_velocity; ++i)
    if (!L.velocity_boundary[i]) sys.u_index[i] = nu++;
  for (long i = 0; i < L.n_edge; ++i)
    if (!L.edge_boundary[i]) sys.E_index[i] = neq++;
  for (long i = 0; i < L.n_face; ++i)
    if (!L.face_boundary[i]) sys.B_index[i] = nb++;

  sys.off_u = 0;
  sys.off_p = nu;
  sys.off_lambda = nu + L.n_pressure;
  sys.off_E = sys.off_lambda + 1;
  sys.off_B = sys.off_E + neq;
  sys.dim = sys.off_B + nb;

  sys.u_lift = velocity_lift(disc, problem.u_bc, t_next);
  sys.E_lift = edge_lift(disc, problem.E_bc, t_next);
  sys.B_lift = face_lift(disc, problem.B_bc, t_next);

  sys.rhs = Eigen::VectorXd::Zero(sys.dim);

  // Per-cell triplet buffers merged in cell order keep the assembly
  // deterministic for any thread count.
  const int nc = disc.mesh.n_cells();
  std::vector<Triplets> cell_trip(nc);
  std::vector<Eigen::VectorXd> cell_rhs(nc);

  parallel_for(nc, disc.threads, [&](int c) {
    const ElementOperators& op = disc.ops[c];
    const LocalForms& lf = disc.forms[c];
    const LocalIndexing ix = local_indexing(disc, c);
    const int n = op.n_vel_dofs(), ne = op.n_edge_dofs(), nf = op.n_face_dofs();

    const Eigen::VectorXd ubar = gather(lag.u, ix.vel);
    const Eigen::VectorXd Bbar = gather(lag.B, ix.face);
    const Eigen::VectorXd un = gather(state_n.u, ix.vel);
    const Eigen::VectorXd Bn = gather(state_n.B, ix.face);

    const Eigen::MatrixXd Kadv = local_advection(op, ubar);
    const LorentzBlocks lor = local_lorentz(op, Bbar);

    const Eigen::MatrixXd Auu =
        lf.M / dt + lf.A / pp.Re + Kadv + pp.s * lor.vu;          // n x n
    const Eigen::MatrixXd AuE = pp.s * lor.vE;                    // n x ne
    const Eigen::MatrixXd AEu = lor.Fu;                           // ne x n
    const Eigen::MatrixXd AEB = -lf.Curl.transpose() / pp.Rem;    // ne x nf
    const Eigen::MatrixXd ABB = lf.Mface / dt;                    // nf x nf
    const Eigen::MatrixXd& ABE = lf.Curl;                         // nf x ne

    Eigen::VectorXd rhs_u = lf.M * un / dt;
    if (problem.f)
      rhs_u += load_velocity(disc.mesh, disc.geom, op,
                             [&](const Vec3& x) { return problem.f(x, t_next); });
    Eigen::VectorXd rhs_E = Eigen::VectorXd::Zero(ne);
    if (problem.g)
      rhs_E += load_edge(disc.mesh, disc.geom, op,
                         [&](const Vec3& x) { return problem.g(x, t_next); });
    const Eigen::VectorXd rhs_B = lf.Mface * Bn / dt;

    Triplets& trip = cell_trip[c];
    Eigen::VectorXd& rloc = cell_rhs[c];
    rloc = Eigen::VectorXd::Zero(sys.dim);

    auto add_block = [&](const Eigen::MatrixXd& K, const std::vector<long>& rows_g,
                         const std::vector<long>& cols_g, const std::vector<long>& row_index,
                         long row_off, const std::vector<long>& col_index, long col_off,
                         const Eigen::VectorXd& col_lift) {
      for (int i = 0; i < K.rows(); ++i) {
        const long ri = row_index.empty() ? rows_g[i] : row_index[rows_g[i]];
        if (ri < 0) continue;
        for (int j = 0; j < K.cols(); ++j) {
          if (K(i, j) == 0.0) continue;
          const long cj = col_index.empty() ? cols_g[j] : col_index[cols_g[j]];
          if (cj < 0)
            rloc[row_off + ri] -= K(i, j) * col_lift[cols_g[j]];
          else
            trip.emplace_back(row_off + ri, col_off + cj, K(i, j));
        }
      }
    };
    const std::vector<long> none;

    // momentum rows
    add_block(Auu, ix.vel, ix.vel, sys.u_index, sys.off_u, sys.u_index, sys.off_u, sys.u_lift);
    add_block(AuE, ix.vel, ix.edge, sys.u_index, sys.off_u, sys.E_index, sys.off_E, sys.E_lift);
    for (int i = 0; i < n; ++i) {  // b(v, p): one pressure column per cell
      const long ri = sys.u_index[ix.vel[i]];
      if (ri >= 0 && lf.Bdiv(i) != 0.0) trip.emplace_back(sys.off_u + ri, sys.off_p + c, lf.Bdiv(i));
    }
    for (int i = 0; i < n; ++i) {
      const long ri = sys.u_index[ix.vel[i]];
      if (ri >= 0) rloc[sys.off_u + ri] += rhs_u[i];
    }

    // continuity row of this cell + pressure-mean multiplier column
    for (int j = 0; j < n; ++j) {
      if (lf.Bdiv(j) == 0.0) continue;
      const long cj = sys.u_index[ix.vel[j]];
      if (cj < 0)
        rloc[sys.off_p + c] -= lf.Bdiv(j) * sys.u_lift[ix.vel[j]];
      else
        trip.emplace_back(sys.off_p + c, sys.off_u + cj, lf.Bdiv(j));
    }
    trip.emplace_back(sys.off_p + c, sys.off_lambda, op.volume);
    trip.emplace_back(sys.off_lambda, sys.off_p + c, op.volume);

    // Ohm rows
    add_block(lf.Medge, ix.edge, ix.edge, sys.E_index, sys.off_E, sys.E_index, sys.off_E,
              sys.E_lift);
    add_block(AEu, ix.edge, ix.vel, sys.E_index, sys.off_E, sys.u_index, sys.off_u, sys.u_lift);
    add_block(AEB, ix.edge, ix.face, sys.E_index, sys.off_E, sys.B_index, sys.off_B, sys.B_lift);
    for (int i = 0; i < ne; ++i) {
      const long ri = sys.E_index[ix.edge[i]];
      if (ri >= 0) rloc[sys.off_E + ri] += rhs_E[i];
    }

    // Faraday rows
    add_block(ABB, ix.face, ix.face, sys.B_index, sys.off_B, sys.B_index, sys.off_B, sys.B_lift);
    add_block(ABE, ix.face, ix.edge, sys.B_index, sys.off_B, sys.E_index, sys.off_E, sys.E_lift);
    for (int i = 0; i < nf; ++i) {
      const long ri = sys.B_index[ix.face[i]];
      if (ri >= 0) rloc[sys.off_B + ri] += rhs_B[i];
    }
  });

  Triplets all;
  size_t total = 0;
  for (const auto& t : cell_trip) total += t.size();
  all.reserve(total);
  for (int c = 0; c < nc; ++c) {
    all.insert(all.end(), cell_trip[c].begin(), cell_trip[c].end());
    sys.rhs += cell_rhs[c];
  }
  sys.mat.resize(sys.dim, sys.dim);
  sys.mat.setFromTriplets(all.begin(), all.end());
  return sys;
}

namespace {

MhdState expand_solution(const Discretization& disc, const SparseSystem& sys,
                         const Eigen::VectorXd& x, double t_next) {
  MhdState st;
  st.t = t_next;
  st.u = sys.u_lift;
  st.E = sys.E_lift;
  st.B = sys.B_lift;
  st.p.resize(disc.layout.n_pressure);
  for (long i = 0; i < disc.layout.n_velocity; ++i)
    if (sys.u_index[i] >= 0) st.u[i] = x[sys.off_u + sys.u_index[i]];
  for (long i = 0; i < disc.layout.n_pressure; ++i) st.p[i] = x[sys.off_p + i];
  for (long i = 0; i < disc.layout.n_edge; ++i)
    if (sys.E_index[i] >= 0) st.E[i] = x[sys.off_E + sys.E_index[i]];
  for (long i = 0; i < disc.layout.n_face; ++i)
    if (sys.B_index[i] >= 0) st.B[i] = x[sys.off_B + sys.B_index[i]];
  return st;
}

}  // namespace

std::pair<MhdState, StepReport> solve_time_step(const Discretization& disc,
                                                const MhdState& state_n, double dt,
                                                const ProblemDef& problem, const PhysParams& pp,
                                                const PicardConfig& picard) {
  MhdState lag = state_n;
  MhdState current = state_n;
  std::vector<double> history;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;

  for (int k = 1; k <= picard.max_iter; ++k) {
    const SparseSystem sys = assemble_step(disc, state_n, lag, dt, problem, pp);
    solver.compute(sys.mat);
    if (solver.info() != Eigen::Success)
      throw SolverError("singular factorization in time step starting at t = " +
                        std::to_string(state_n.t));
    const Eigen::VectorXd x = solver.solve(sys.rhs);
    current = expand_solution(disc, sys, x, state_n.t + dt);

    const Eigen::VectorXd du = current.u - lag.u;
    const Eigen::VectorXd dB = current.B - lag.B;
    const double num = std::sqrt(du.dot(disc.M_global * du) +
                                 dB.dot(disc.Mface_global * dB) / pp.Rem);
    const double den = std::sqrt(disc.energy(current.u, current.B, pp));
    const double rel = den > 0 ? num / den : num;
    history.push_back(rel);
    if (rel <= picard.tol) {
      StepReport rep = diagnostics(disc, current, pp);
      rep.picard_iterations = k;
      rep.final_increment = rel;
      return {current, rep};
    }
    lag = current;
  }
  std::ostringstream os;
  os << "Picard iteration did not converge within " << picard.max_iter
     << " iterations at t = " << state_n.t + dt << "; increments:";
  for (double r : history) os << " " << r;
  throw SolverError(os.str());
}

MhdState initial_state(const Discretization& disc, const ProblemDef& problem) {
  MhdState st;
  st.t = 0.0;
  st.u = problem.u0_dofs ? *problem.u0_dofs
         : problem.u0    ? interpolate_velocity(disc.mesh, disc.geom, problem.u0)
                         : Eigen::VectorXd::Zero(disc.layout.n_velocity);
  st.B = problem.B0_dofs ? *problem.B0_dofs
         : problem.B0    ? interpolate_face(disc.mesh, disc.geom, problem.B0)
                         : Eigen::VectorXd::Zero(disc.layout.n_face);
  st.E = problem.E0_dofs ? *problem.E0_dofs
         : problem.E0    ? interpolate_edge(disc.mesh, disc.geom, problem.E0)
                         : Eigen::VectorXd::Zero(disc.layout.n_edge);
  st.p = Eigen::VectorXd::Zero(disc.layout.n_pressure);
  return st;
}

StepReport diagnostics(const Discretization& disc, const MhdState& state, const PhysParams& pp) {
  StepReport rep;
  rep.div_u = divergence_l2_velocity(disc.mesh, disc.geom, state.u);
  rep.div_B = divergence_l2_face(disc.mesh, disc.geom, state.B);
  rep.energy = disc.energy(state.u, state.B, pp);
  return rep;
}

void write_step_csv_header(std::ostream& os) {
  os << "step,t,picard_iters,increment,div_u,div_B,energy\n";
}

void write_step_csv_row(std::ostream& os, int step, double t, const StepReport& rep) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", step, t,
                rep.picard_iterations, rep.final_increment, rep.div_u, rep.div_B, rep.energy);
  os << buf;
}

TransientResult run_transient(const Discretization& disc, const ProblemDef& problem,
                              const PhysParams& pp, const PicardConfig& picard, double T,
                              double dt, std::ostream* step_csv) {
  if (!(T > 0) || !(dt > 0) || dt > T * (1 + 1e-12))
    throw ConfigError("run_transient: need 0 < dt <= T");
  TransientResult result;
  result.final_state = initial_state(disc, problem);
  if (step_csv) write_step_csv_header(*step_csv);

  const long nsteps = static_cast<long>(std::ceil(T / dt - 1e-9));
  for (long k = 0; k < nsteps; ++k) {
    const double t_next = (k + 1 == nsteps) ? T : (k + 1) * dt;
    const double dtk = t_next - result.final_state.t;
    try {
      auto [state, rep] = solve_time_step(disc, result.final_state, dtk, problem, pp, picard);
      result.final_state = std::move(state);
      result.reports.push_back(rep);
    } catch (const SolverError& err) {
      std::ostringstream os;
      os << "step " << k + 1 << " (t -> " << t_next << "): " << err.what();
      throw SolverError(os.str());
    }
    if (step_csv)
      write_step_csv_row(*step_csv, static_cast<int>(k + 1), result.final_state.t,
                         result.reports.back());
  }
  return result;
}

ProblemDef make_decay_problem(const Discretization& disc, unsigned seed) {
  ProblemDef prob;
  // u0 = curl(psi (1,1,1)) with psi = [xyz(1-x)(1-y)(1-z)]^2: smooth,
  // divergence free, vanishing trace.
  prob.u0 = [](const Vec3& x) {
    auto b = [](double s) { return s * (1 - s); };
    auto db = [](double s) { return 1 - 2 * s; };
    const double w = b(x.x()) * b(x.y()) * b(x.z());
    const Vec3 grad = 2 * w *
                      Vec3(db(x.x()) * b(x.y()) * b(x.z()), b(x.x()) * db(x.y()) * b(x.z()),
                           b(x.x()) * b(x.y()) * db(x.z()));
    return Vec3(grad.y() - grad.z(), grad.z() - grad.x(), grad.x() - grad.y());
  };
  // B0 = curl of a random interior edge field: exactly solenoidal and with
  // zero normal trace, cellwise div = 0 by the telescoping identity.
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd Edofs = Eigen::VectorXd::Zero(disc.layout.n_edge);
  for (long e = 0; e < disc.layout.n_edge; ++e)
    Edofs[e] = disc.layout.edge_boundary[e] ? 0.0 : unif(rng);
  prob.B0_dofs = curl_edge_to_face(disc.mesh, disc.geom, Edofs);
  return prob;
}

}  // namespace mhdvem
