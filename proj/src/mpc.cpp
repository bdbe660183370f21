#include "platoon/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "platoon/qcqp.hpp"

namespace platoon {

void MpcConfig::validate() const {
  if (!(dt_s > 0)) throw std::invalid_argument("MpcConfig: dt must be positive");
  if (horizon < 2) throw std::invalid_argument("MpcConfig: horizon must be >= 2");
  if (q_speed < 0 || q_pos < 0 || r_accel < 0)
    throw std::invalid_argument("MpcConfig: weights must be non-negative");
  if (!(p_soft > 0)) throw std::invalid_argument("MpcConfig: p_soft must be positive");
  if (zeta < 0 || zeta > 1) throw std::invalid_argument("MpcConfig: zeta must be in [0,1]");
  if (!(solver_tol > 0)) throw std::invalid_argument("MpcConfig: solver_tol must be positive");
}

const VehicleState& HorizonTrajectory::at(std::int64_t step) const {
  if (states.empty()) throw std::logic_error("HorizonTrajectory: empty");
  if (step <= first_step) return states.front();
  const std::int64_t off = step - first_step;
  if (off >= static_cast<std::int64_t>(states.size())) return states.back();
  return states[static_cast<std::size_t>(off)];
}

double HorizonTrajectory::accel_at(std::int64_t step) const {
  if (accel_mps2.empty()) return 0.0;
  const std::int64_t off = std::clamp<std::int64_t>(
      step - first_step, 0, static_cast<std::int64_t>(accel_mps2.size()) - 1);
  return accel_mps2[static_cast<std::size_t>(off)];
}

HorizonTrajectory build_reference(const SpeedProfile& profile, double s_now_m,
                                  std::int64_t tick, const MpcConfig& cfg) {
  const int h = cfg.horizon;
  HorizonTrajectory out;
  out.kind = TrajectoryKind::Reference;
  out.first_step = tick;
  std::vector<VehicleState> st(static_cast<std::size_t>(h) + 1);
  double s = s_now_m;
  for (int j = 0; j <= h; ++j) {
    if (s > profile.end_m() + 1e-9) out.truncated = true;
    const double v = profile.v_at(s);
    st[static_cast<std::size_t>(j)] = {v, s};
    s += cfg.dt_s * v;
  }
  out.states.assign(st.begin(), st.end() - 1);
  out.accel_mps2.resize(static_cast<std::size_t>(h));
  for (int j = 0; j < h; ++j)
    out.accel_mps2[static_cast<std::size_t>(j)] =
        (st[static_cast<std::size_t>(j) + 1].v_mps - st[static_cast<std::size_t>(j)].v_mps) /
        cfg.dt_s;
  return out;
}

HorizonTrajectory build_assumed(const std::optional<HorizonTrajectory>& prev_optimal,
                                const VehicleState& measured, std::int64_t tick,
                                const MpcConfig& cfg,
                                const std::function<double(const VehicleState&)>& coast_accel) {
  const int h = cfg.horizon;
  HorizonTrajectory out;
  out.kind = TrajectoryKind::Assumed;
  out.first_step = tick;
  out.states.resize(static_cast<std::size_t>(h));
  out.accel_mps2.resize(static_cast<std::size_t>(h));
  if (prev_optimal && prev_optimal->first_step == tick - 1 &&
      prev_optimal->states.size() >= static_cast<std::size_t>(h)) {
    for (int j = 0; j + 1 < h; ++j) {
      out.states[static_cast<std::size_t>(j)] = prev_optimal->at(tick + j);
      out.accel_mps2[static_cast<std::size_t>(j)] = prev_optimal->accel_at(tick + j);
    }
    // One step past the previous horizon: hold the last optimal input.
    const double a_last = prev_optimal->accel_mps2.back();
    const VehicleState& tail = out.states[static_cast<std::size_t>(h) - 2];
    out.states[static_cast<std::size_t>(h) - 1] = {
        std::max(tail.v_mps + cfg.dt_s * a_last, 0.0), tail.s_m + cfg.dt_s * tail.v_mps};
    out.accel_mps2[static_cast<std::size_t>(h) - 1] = a_last;
    return out;
  }
  // No previous solution: coasting rollout from the measured state.
  VehicleState x = measured;
  for (int j = 0; j < h; ++j) {
    double a = coast_accel ? coast_accel(x) : 0.0;
    if (x.v_mps + cfg.dt_s * a < 0.0) a = -x.v_mps / cfg.dt_s;
    out.states[static_cast<std::size_t>(j)] = x;
    out.accel_mps2[static_cast<std::size_t>(j)] = a;
    x = {x.v_mps + cfg.dt_s * a, x.s_m + cfg.dt_s * x.v_mps};
  }
  return out;
}

double coasting_accel(const VehicleParams& p, const VehicleState& state, double gap_m,
                      double slope_rad) {
  if (state.v_mps <= 0.0) return 0.0;
  const double engine_floor =
      std::max(p.p_min_w / state.v_mps, -p.mass_kg * p.standstill_accel_cap_mps2);
  const ForceBreakdown ext = external_forces(p, state, gap_m, slope_rad);
  return (engine_floor + ext.total_n()) / p.mass_kg;
}

namespace {

// Variable layout: u = [a_0..a_{H-1}, eb_0..eb_{H-1}, ev_0..ev_{H-1}].
// State maps: v_j = v0 + dt*sum_{m<j} a_m,
//             s_j = s0 + j*dt*v0 + dt^2*sum_{m<j} (j-1-m)*a_m.

struct Assembly {
  int h = 0;
  double dt = 0.0;
  double v0 = 0.0;
  double s0 = 0.0;
  qcqp::Problem prob;

  double vconst(int) const { return v0; }
  double sconst(int j) const { return s0 + j * dt * v0; }

  // Add weight*(expr - target)^2 where expr is v_j or s_j (prefix-affine in a).
  void add_state_cost(bool position, int j, double weight, double target) {
    if (weight == 0.0 || j == 0) return;
    const double c = (position ? sconst(j) : vconst(j)) - target;
    for (int m = 0; m < j; ++m) {
      const double wm = position ? dt * dt * (j - 1 - m) : dt;
      if (wm == 0.0) continue;
      prob.q[m] += 2.0 * weight * c * wm;
      for (int r = 0; r < j; ++r) {
        const double wr = position ? dt * dt * (j - 1 - r) : dt;
        prob.P(m, r) += 2.0 * weight * wm * wr;
      }
    }
  }

  std::vector<qcqp::LinTerm> vrow(int j) const {
    std::vector<qcqp::LinTerm> row;
    row.reserve(static_cast<std::size_t>(j));
    for (int m = 0; m < j; ++m) row.push_back({m, dt});
    return row;
  }

  // Trapezoidal position through step j+1: s_j + dt*(v_j + v_{j+1})/2,
  // the exact integral of the piecewise-linear model speed.
  std::vector<qcqp::LinTerm> srow_trapezoid(int j1, double* c_out) const {
    const int j = j1 - 1;
    std::vector<qcqp::LinTerm> row;
    row.reserve(static_cast<std::size_t>(j1));
    for (int m = 0; m < j; ++m) row.push_back({m, dt * dt * (j - 1 - m) + dt * dt});
    row.push_back({j, 0.5 * dt * dt});
    *c_out = sconst(j) + dt * v0;
    return row;
  }
};

}  // namespace

MpcOutput solve_step(const MpcInputs& in, const MpcConfig& cfg) {
  cfg.validate();
  if (!in.vehicle || !in.reference || !in.own_assumed || !in.road)
    throw std::invalid_argument("solve_step: vehicle, reference, own_assumed, road required");
  const VehicleParams& p = *in.vehicle;
  const RoadProfile& road = *in.road;
  const bool follower = in.pred_assumed != nullptr;
  in.env_self.validate();
  if (follower) in.env_pred.validate();

  const int h = cfg.horizon;
  const double dt = cfg.dt_s;
  const int n = 3 * h;
  const double zeta = follower ? cfg.zeta : 0.0;

  double gamma = 0.0;
  if (follower) {
    gamma = -1.0 / (2.0 * in.env_self.a_min_ub);
    if (!(gamma > 0.0))
      throw std::logic_error("solve_step: safety curvature -1/(2*a_min_ub) must be positive");
  }

  Assembly as;
  as.h = h;
  as.dt = dt;
  as.v0 = std::max(in.measured.v_mps, 0.0);
  as.s0 = in.measured.s_m;
  as.prob.P = Eigen::MatrixXd::Zero(n, n);
  as.prob.q = Eigen::VectorXd::Zero(n);

  const auto clamp_s = [&](double s) { return std::clamp(s, 0.0, road.length_m()); };

  // Frozen constraint data at the own assumed states.
  std::vector<double> a_lo(h), a_hi(h), a_c(h), a_ref(h), vmax_hat(h), vmin_hat(h);
  for (int j = 0; j < h; ++j) {
    const VehicleState xh_raw = in.own_assumed->at(in.tick + j);
    const VehicleState xh{std::max(xh_raw.v_mps, 0.0), clamp_s(xh_raw.s_m)};
    double gap = kInfiniteGap;
    if (follower)
      gap = std::max(in.pred_assumed->at(in.tick + j).s_m - xh.s_m - in.pred_length_m, 0.0);
    const double slope = road.slope_at(xh.s_m);
    const double ext = external_forces(p, xh, gap, slope).total_n();
    const InputBounds ib = input_bounds(p, xh.v_mps);
    a_lo[j] = (-p.mass_kg * p.eta_brake * p.g_mps2 * p.mu + ext) / p.mass_kg;
    a_hi[j] = (ib.engine.hi_n + ext) / p.mass_kg;
    a_c[j] = coasting_accel(p, xh, gap, slope);
    a_ref[j] = in.reference->accel_at(in.tick + j);
    vmax_hat[j] = road.vmax_at(xh.s_m);
    vmin_hat[j] = road.vmin_at(xh.s_m);
  }

  // Cost: blended state tracking, input deviation, slack penalties.
  for (int j = 1; j < h; ++j) {
    const VehicleState& ref = in.reference->at(in.tick + j);
    as.add_state_cost(false, j, (1.0 - zeta) * cfg.q_speed, ref.v_mps);
    as.add_state_cost(true, j, (1.0 - zeta) * cfg.q_pos, ref.s_m);
    if (follower) {
      const VehicleState& tgt = in.pred_assumed->at(in.tick + j - in.time_gap_steps);
      as.add_state_cost(false, j, zeta * cfg.q_speed, tgt.v_mps);
      as.add_state_cost(true, j, zeta * cfg.q_pos, tgt.s_m);
    }
  }
  for (int j = 0; j < h; ++j) {
    as.prob.P(j, j) += 2.0 * cfg.r_accel;
    as.prob.q[j] += -2.0 * cfg.r_accel * a_ref[j];
    as.prob.P(h + j, h + j) += 2.0 * cfg.p_soft;
    as.prob.P(2 * h + j, 2 * h + j) += 2.0 * cfg.p_soft;
  }

  auto& ineqs = as.prob.ineqs;
  char label[48];
  for (int j = 0; j < h; ++j) {
    qcqp::Constraint hi;
    hi.a = {{j, 1.0}};
    hi.b = -a_hi[j];
    std::snprintf(label, sizeof label, "a_hi[%d]", j);
    hi.label = label;
    ineqs.push_back(std::move(hi));

    qcqp::Constraint lo;
    lo.a = {{j, -1.0}};
    lo.b = a_lo[j];
    std::snprintf(label, sizeof label, "a_lo[%d]", j);
    lo.label = label;
    ineqs.push_back(std::move(lo));

    qcqp::Constraint soft;  // min(a_c, a_ref) - a_j - eb_j <= 0
    soft.a = {{j, -1.0}, {h + j, -1.0}};
    soft.b = std::min(a_c[j], a_ref[j]);
    std::snprintf(label, sizeof label, "soft_brake[%d]", j);
    soft.label = label;
    ineqs.push_back(std::move(soft));

    qcqp::Constraint ebpos;
    ebpos.a = {{h + j, -1.0}};
    std::snprintf(label, sizeof label, "eb_pos[%d]", j);
    ebpos.label = label;
    ineqs.push_back(std::move(ebpos));

    qcqp::Constraint evpos;
    evpos.a = {{2 * h + j, -1.0}};
    std::snprintf(label, sizeof label, "ev_pos[%d]", j);
    evpos.label = label;
    ineqs.push_back(std::move(evpos));
  }
  for (int j = 1; j < h; ++j) {
    qcqp::Constraint vmax;  // v_j <= vmax_hat
    vmax.a = as.vrow(j);
    vmax.b = as.vconst(j) - vmax_hat[j];
    std::snprintf(label, sizeof label, "v_max[%d]", j);
    vmax.label = label;
    ineqs.push_back(std::move(vmax));

    qcqp::Constraint vpos;  // -v_j <= 0
    vpos.a = as.vrow(j);
    for (auto& t : vpos.a) t.coef = -t.coef;
    vpos.b = -as.vconst(j);
    std::snprintf(label, sizeof label, "v_nonneg[%d]", j);
    vpos.label = label;
    ineqs.push_back(std::move(vpos));

    qcqp::Constraint vmin;  // vmin_hat - v_j - ev_j <= 0
    vmin.a = as.vrow(j);
    for (auto& t : vmin.a) t.coef = -t.coef;
    vmin.a.push_back({2 * h + j, -1.0});
    vmin.b = vmin_hat[j] - as.vconst(j);
    std::snprintf(label, sizeof label, "v_min[%d]", j);
    vmin.label = label;
    ineqs.push_back(std::move(vmin));
  }
  int first_safety = -1;
  if (follower) {
    first_safety = static_cast<int>(ineqs.size());
    for (int j = 0; j < h; ++j) {
      const VehicleState pd = in.pred_assumed->at(in.tick + j - 1);
      const double rhs = pd.s_m - pd.v_mps * pd.v_mps / (2.0 * in.env_pred.a_min_lb) -
                         in.pred_length_m;
      // gamma*v_{j+1}^2 + s~_{j+1} - rhs <= 0 with the trapezoidal position.
      qcqp::Constraint safe;
      safe.w = as.vrow(j + 1);
      safe.w_scale = 2.0 * gamma;
      double s_const = 0.0;
      safe.a = as.srow_trapezoid(j + 1, &s_const);
      // linear part also carries 2*gamma*v0*w from expanding (v0 + w'u)^2
      for (const auto& t : safe.w) {
        bool merged = false;
        for (auto& at : safe.a)
          if (at.idx == t.idx) {
            at.coef += 2.0 * gamma * as.v0 * t.coef;
            merged = true;
            break;
          }
        if (!merged) safe.a.push_back({t.idx, 2.0 * gamma * as.v0 * t.coef});
      }
      safe.b = gamma * as.v0 * as.v0 + s_const - rhs;
      std::snprintf(label, sizeof label, "safety[%d]", j);
      safe.label = label;
      ineqs.push_back(std::move(safe));
    }
  }

  // Warm start: assumed inputs clamped into the input box, slacks sized to
  // make the soft constraints strictly feasible at that guess.
  Eigen::VectorXd guess = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < h; ++j) {
    const double inset = 1e-6 * (1.0 + std::abs(a_hi[j]) + std::abs(a_lo[j]));
    guess[j] = std::clamp(in.own_assumed->accel_at(in.tick + j), a_lo[j] + inset,
                          a_hi[j] - inset);
    guess[h + j] = std::max(0.0, std::min(a_c[j], a_ref[j]) - guess[j]) + 0.1;
    const double v_hat = std::max(in.own_assumed->at(in.tick + j).v_mps, 0.0);
    guess[2 * h + j] = std::max(0.0, vmin_hat[j] - v_hat) + 0.1;
  }

  qcqp::Options opts;
  opts.tol = cfg.solver_tol;
  opts.t0 = 1e3;  // controller problems are warm-started and well scaled
  opts.barrier_scale = 60.0;
  opts.max_newton = 1500;
  const qcqp::Solution sol = qcqp::solve(as.prob, &guess, opts);

  MpcOutput out;
  out.solver_iters = sol.newton_iters;
  out.kkt_stationarity = sol.stationarity_inf;
  out.objective = sol.objective;

  {
    double gap_now = kInfiniteGap;
    if (follower)
      gap_now = std::max(
          in.pred_assumed->at(in.tick).s_m - in.measured.s_m - in.pred_length_m, 0.0);
    out.coasting_accel_now = coasting_accel(
        p, {std::max(in.measured.v_mps, 0.0), clamp_s(in.measured.s_m)}, gap_now,
        road.slope_at(clamp_s(in.measured.s_m)));
  }

  if (sol.status == qcqp::Status::Infeasible) {
    out.hard_infeasible = true;
    std::ostringstream msg;
    msg << "hard infeasible; worst violations:";
    int listed = 0;
    for (const auto& c : as.prob.ineqs) {
      const double f = c.value(sol.x);
      if (f > 0 && listed < 5) {
        msg << ' ' << c.label << "=" << f;
        ++listed;
      }
    }
    out.message = msg.str();
    out.a_star_mps2 = a_lo[0];  // defensive output; the engine treats this tick as fatal
    out.brake_flag = true;
    return out;
  }
  if (sol.status == qcqp::Status::MaxIterations) out.message = sol.message;

  out.a_star_mps2 = sol.x[0];
  out.brake_flag = out.a_star_mps2 < out.coasting_accel_now;
  out.slack_max = 0.0;
  for (int j = 0; j < 2 * h; ++j) out.slack_max = std::max(out.slack_max, sol.x[h + j]);

  out.optimal.kind = TrajectoryKind::Optimal;
  out.optimal.first_step = in.tick;
  out.optimal.states.resize(static_cast<std::size_t>(h));
  out.optimal.accel_mps2.resize(static_cast<std::size_t>(h));
  VehicleState x{as.v0, as.s0};
  for (int j = 0; j < h; ++j) {
    out.optimal.states[static_cast<std::size_t>(j)] = x;
    const double a = sol.x[j];
    out.optimal.accel_mps2[static_cast<std::size_t>(j)] = a;
    x = {std::max(x.v_mps + dt * a, 0.0), x.s_m + dt * x.v_mps};
  }

  out.min_safety_slack_m = std::numeric_limits<double>::infinity();
  if (follower) {
    for (int j = 0; j < h; ++j) {
      const double f = as.prob.ineqs[static_cast<std::size_t>(first_safety + j)].value(sol.x);
      out.min_safety_slack_m = std::min(out.min_safety_slack_m, -f);
    }
  }
  return out;
}

}  // namespace platoon
