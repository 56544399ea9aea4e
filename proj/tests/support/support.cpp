#include "support.hpp"

#include <algorithm>
#include <cmath>

#include "tstitch/io_util.hpp"

namespace ts::testing {

Dataset random_dataset(std::size_t n_traj, std::size_t dS, std::size_t dA, std::size_t max_len,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  Dataset ds;
  ds.dims = {dS, dA};
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    return v;
  };
  for (std::size_t i = 0; i < n_traj; ++i) {
    Trajectory t;
    t.id = i * 3 + 1;
    auto s = vec(dS);
    const auto h = len(rng);
    for (std::size_t k = 0; k < h; ++k) {
      Transition tr{s, vec(dA), normal(rng), vec(dS), false};
      s = tr.next_state;
      t.steps.push_back(std::move(tr));
    }
    t.steps.back().terminal = (rng() & 1) != 0;
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

double compensated_sum(std::span<const double> xs) {
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) c += (sum - t) + x;
    else c += (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

double TabularMdp::forward(int s, int sn) const {
  double acc = 0.0;
  for (int a = 0; a < n_actions; ++a) acc += pi(s, a) * p(s, a, sn);
  return acc;
}

double TabularMdp::inverse(int s, int sn, int a) const { return pi(s, a) * p(s, a, sn) / forward(s, sn); }

namespace {

std::vector<double> simplex(int n, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& x : v) total += (x = g(rng) + 0.05);
  for (double& x : v) x /= total;
  return v;
}

}  // namespace

TabularMdp random_mdp(int n_states, int n_actions, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.initial = simplex(n_states, rng);
  for (int s = 0; s < n_states; ++s) {
    const auto row = simplex(n_actions, rng);
    m.policy.insert(m.policy.end(), row.begin(), row.end());
  }
  for (int sa = 0; sa < n_states * n_actions; ++sa) {
    const auto row = simplex(n_states, rng);
    m.transition.insert(m.transition.end(), row.begin(), row.end());
  }
  return m;
}

FactorLogDensities exact_factors(const TabularMdp& mdp) {
  auto idx = [](std::span<const double> v) { return static_cast<int>(v[0]); };
  FactorLogDensities f;
  f.initial = [&mdp, idx](std::span<const double> s) {
    return std::log(mdp.initial[static_cast<std::size_t>(idx(s))]);
  };
  f.policy = [&mdp, idx](std::span<const double> s, std::span<const double> a) {
    return std::log(mdp.pi(idx(s), idx(a)));
  };
  f.dynamics = [&mdp, idx](std::span<const double> s, std::span<const double> a, std::span<const double> sn) {
    return std::log(mdp.p(idx(s), idx(a), idx(sn)));
  };
  f.forward = [&mdp, idx](std::span<const double> s, std::span<const double> sn) {
    return std::log(mdp.forward(idx(s), idx(sn)));
  };
  f.inverse = [&mdp, idx](std::span<const double> s, std::span<const double> sn, std::span<const double> a) {
    return std::log(mdp.inverse(idx(s), idx(sn), idx(a)));
  };
  return f;
}

std::vector<Trajectory> enumerate_trajectories(const TabularMdp& mdp, int length) {
  // Each trajectory is a sequence s0 a0 s1 a1 ... s_L; count the combinations as mixed radix.
  const int S = mdp.n_states, A = mdp.n_actions;
  std::size_t total = static_cast<std::size_t>(S);
  for (int k = 0; k < length; ++k) total *= static_cast<std::size_t>(S * A);
  std::vector<Trajectory> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    std::vector<int> states{static_cast<int>(c % S)};
    c /= S;
    std::vector<int> actions;
    for (int k = 0; k < length; ++k) {
      actions.push_back(static_cast<int>(c % A));
      c /= A;
      states.push_back(static_cast<int>(c % S));
      c /= S;
    }
    Trajectory t;
    t.id = code;
    for (int k = 0; k < length; ++k) {
      t.steps.push_back({{static_cast<double>(states[k])},
                         {static_cast<double>(actions[k])},
                         0.0,
                         {static_cast<double>(states[k + 1])},
                         false});
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

using nn::Mat;

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
  return m;
}

nn::MlpSpec spec(std::vector<int> sizes, nn::Head head, double bound = 1.0) {
  nn::MlpSpec s;
  s.layer_sizes = std::move(sizes);
  s.head = head;
  s.bound = bound;
  return s;
}

std::vector<double> random_params(const nn::MlpSpec& s, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.7);
  std::vector<double> p(s.param_count());
  for (double& x : p) x = normal(rng);
  return p;
}

bool clear_of_kinks(const nn::MlpSpec& s, std::span<const double> p, const Mat& x) {
  return nn::min_abs_preactivation(s, p, x) >= 1e-3;
}

// Fills grad (zeroed first) through an accumulate-style callable.
template <class F>
nn::LossFunction filled(F f) {
  return [f](std::span<const double> p, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    return f(p, g);
  };
}

}  // namespace

LossCase make_loss_case(nn::LossKind kind, std::uint64_t seed) {
  constexpr int B = 5;
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(kind), attempt));
    LossCase c;
    switch (kind) {
      case nn::LossKind::mse:
      case nn::LossKind::bc_mse:
      case nn::LossKind::weighted_bc_mse: {
        const auto s = kind == nn::LossKind::mse ? spec({2, 4, 2}, nn::Head::linear)
                                                 : spec({2, 4, 2}, nn::Head::tanh_scaled, 2.0);
        const Mat x = random_mat(2, B, rng), y = random_mat(2, B, rng);
        std::vector<double> w(B);
        std::uniform_real_distribution<double> u(0.1, 2.0);
        for (double& v : w) v = u(rng);
        c.point = random_params(s, rng);
        if (!clear_of_kinks(s, c.point, x)) continue;
        if (kind == nn::LossKind::mse) {
          c.loss = filled([=](std::span<const double> p, std::span<double> g) { return nn::mse_loss(s, p, x, y, g); });
        } else if (kind == nn::LossKind::bc_mse) {
          c.loss = filled([=](std::span<const double> p, std::span<double> g) { return nn::bc_mse_loss(s, p, x, y, g); });
        } else {
          c.loss = filled([=](std::span<const double> p, std::span<double> g) {
            return nn::weighted_bc_mse_loss(s, p, x, y, w, g);
          });
        }
        break;
      }
      case nn::LossKind::gaussian_nll: {
        const auto s = spec({2, 4, 2}, nn::Head::gaussian);
        const Mat x = random_mat(2, B, rng), y = random_mat(2, B, rng);
        c.point = random_params(s, rng);
        if (!clear_of_kinks(s, c.point, x)) continue;
        const auto out = nn::forward(s, c.point, x);
        if (out.log_std.maxCoeff() > nn::kMaxLogStd - 0.1 || out.log_std.minCoeff() < nn::kMinLogStd + 0.1) continue;
        c.loss = filled([=](std::span<const double> p, std::span<double> g) { return nn::gaussian_nll_loss(s, p, x, y, g); });
        break;
      }
      case nn::LossKind::bellman_mse: {
        const auto s = spec({2, 4, 1}, nn::Head::linear);
        const Mat x = random_mat(2, B, rng), t = random_mat(1, B, rng);
        c.point = random_params(s, rng);
        if (!clear_of_kinks(s, c.point, x)) continue;
        c.loss = filled([=](std::span<const double> p, std::span<double> g) { return nn::bellman_mse_loss(s, p, x, t, g); });
        break;
      }
      case nn::LossKind::wgan_disc: {
        const auto s = spec({3, 4, 1}, nn::Head::linear);
        const Mat real = random_mat(3, B, rng), fake = random_mat(3, B, rng);
        c.point = random_params(s, rng);
        if (!clear_of_kinks(s, c.point, real) || !clear_of_kinks(s, c.point, fake)) continue;
        c.loss = filled([=](std::span<const double> p, std::span<double> g) { return nn::wgan_disc_loss(s, p, real, fake, g); });
        break;
      }
      case nn::LossKind::wgan_gen: {
        const auto gs = spec({4, 4, 1}, nn::Head::linear);
        const auto ds = spec({3, 4, 1}, nn::Head::linear);
        const Mat cond = random_mat(2, B, rng), z = random_mat(2, B, rng);
        c.point = random_params(gs, rng);
        const auto disc = random_params(ds, rng);
        Mat gin(4, B);
        gin << z, cond;
        if (!clear_of_kinks(gs, c.point, gin)) continue;
        const Mat r = nn::forward(gs, c.point, gin).value;
        Mat fake(3, B);
        fake << cond, r;
        if (!clear_of_kinks(ds, disc, fake)) continue;
        c.loss = filled([=](std::span<const double> p, std::span<double> g) {
          return nn::wgan_gen_loss(gs, p, ds, disc, cond, z, g);
        });
        break;
      }
      case nn::LossKind::cvae_elbo: {
        const auto es = spec({4, 4, 2}, nn::Head::gaussian);
        const auto dsp = spec({4, 4, 2}, nn::Head::linear);
        const Mat cond = random_mat(2, B, rng), target = random_mat(2, B, rng), eps = random_mat(2, B, rng);
        const auto ep = random_params(es, rng);
        const auto dp = random_params(dsp, rng);
        Mat ein(4, B);
        ein << cond, target;
        if (!clear_of_kinks(es, ep, ein)) continue;
        const auto q = nn::forward(es, ep, ein);
        if (q.log_std.maxCoeff() > nn::kMaxLogStd - 0.1 || q.log_std.minCoeff() < nn::kMinLogStd + 0.1) continue;
        Mat din(4, B);
        din << cond, q.value + (q.log_std.array().exp() * eps.array()).matrix();
        if (!clear_of_kinks(dsp, dp, din)) continue;
        c.point = ep;
        c.point.insert(c.point.end(), dp.begin(), dp.end());
        const auto ne = ep.size();
        c.loss = filled([=](std::span<const double> p, std::span<double> g) {
          return nn::cvae_elbo_loss(es, p.first(ne), dsp, p.subspan(ne), cond, target, eps, 0.5,
                                    g.empty() ? g : g.first(ne), g.empty() ? g : g.subspan(ne));
        });
        break;
      }
    }
    return c;
  }
}

double worst_grad_error(nn::LossKind kind, int trials, std::uint64_t seed) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto c = make_loss_case(kind, derive_seed(seed, static_cast<std::uint64_t>(t)));
    worst = std::max(worst, nn::grad_check(c.loss, c.point, 1e-5).max_rel_error);
  }
  return worst;
}

Trajectory chain(std::uint64_t id, std::vector<double> states, std::vector<double> rewards, bool terminal) {
  Trajectory t{id, {}};
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    t.steps.push_back({{states[k]}, {states[k + 1] - states[k]}, rewards[k], {states[k + 1]}, false});
  }
  t.steps.back().terminal = terminal;
  return t;
}

Dataset one_d(std::vector<Trajectory> ts) {
  Dataset d;
  d.dims = {1, 1};
  d.trajectories = std::move(ts);
  return d;
}

Dataset lattice_dataset(std::size_t n, std::uint64_t seed, bool positive_rewards) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> step(-1, 1), start(0, 2), len(3, 9);
  std::uniform_real_distribution<double> r(positive_rewards ? 0.0 : -1.0, 1.0);
  Dataset d;
  d.dims = {2, 2};
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory t{i + 10, {}};
    std::vector<double> s{double(start(rng)), double(start(rng))};
    const int L = len(rng);
    for (int k = 0; k < L; ++k) {
      std::vector<double> sn{std::clamp(s[0] + step(rng), 0.0, 4.0), std::clamp(s[1] + step(rng), 0.0, 4.0)};
      const bool term = sn[0] == 4.0 && sn[1] == 4.0;
      t.steps.push_back({s, {sn[0] - s[0], sn[1] - s[1]}, r(rng), sn, term});
      s = sn;
      if (term) break;
    }
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

double lattice_value(std::span<const double> s) { return s[0] + 0.5 * s[1] + 0.1 * std::sin(7.0 * s[0] * s[1]); }

TableModels lattice_models() {
  TableModels m;
  m.gate = [](std::span<const double> s, std::span<const double> c) {
    const int h = static_cast<int>(s[0] * 7 + s[1] * 13 + c[0] * 17 + c[1] * 29);
    return h % 3 != 0;
  };
  return m;
}

}  // namespace ts::testing
