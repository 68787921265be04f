#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "helpers.hpp"

using namespace hflvne;
using testing_util::line_substrate;
using testing_util::make_vnr;

namespace {

std::shared_ptr<const StateMatrix> random_state(std::mt19937_64& rng, std::size_t rows) {
  auto m = std::make_shared<StateMatrix>();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    m->node_ids.push_back(static_cast<int>(r));
    Features f{u(rng) * 100, u(rng) * 300, u(rng) * 200};
    m->raw.push_back(f);
  }
  m->values = normalize_columns(m->raw);
  return m;
}

std::vector<DecisionTrace> random_batch(std::mt19937_64& rng, const PolicyParams& p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DecisionTrace> batch(2 + rng() % 5);
  for (auto& t : batch) {
    t.reward = u(rng);
    const auto k = 1 + rng() % 3;
    for (std::size_t i = 0; i < k; ++i) {
      auto st = random_state(rng, 3 + rng() % 6);
      t.decisions.push_back({st, rng() % st->rows(), forward(p, *st)});
    }
  }
  return batch;
}

}  // namespace

TEST(ExtractState, TwoNodeExample) {
  std::vector<NodeSpec> nodes{{0, {0, 0}, 70}, {0, {3, 4}, 90}};
  Substrate s(1, nodes, {{0, 1, 40}});
  auto m = extract_state(s, 0);
  ASSERT_EQ(m.rows(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(m.raw[r][1], 40);
    EXPECT_EQ(m.raw[r][2], 2.5);
  }
  EXPECT_EQ(m.raw[0][0], 70);
  // cpu column spans [70, 90]; the other two columns are constant.
  EXPECT_EQ(m.values[0][0], 0.0);
  EXPECT_EQ(m.values[1][0], 1.0);
  EXPECT_EQ(m.values[0][1], 0.5);
  EXPECT_EQ(m.values[1][2], 0.5);
}

TEST(ExtractState, IsolatedNode) {
  Substrate s(1, {{0, {5, 5}, 30}}, {});
  auto m = extract_state(s, 0);
  ASSERT_EQ(m.rows(), 1u);
  EXPECT_EQ(m.raw[0][1], 0.0);
  EXPECT_EQ(m.raw[0][2], 0.0);
}

TEST(ExtractState, InterDomainLinksCountAndShapeMatchesDomains) {
  auto s = generate_substrate(SubstrateConfig{}, 6);
  for (int d = 0; d < 4; ++d) {
    auto m = extract_state(s, d);
    ASSERT_EQ(m.rows(), 25u);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double bw = 0;
      for (const auto& l : s.links())
        if (l.touches(m.node_ids[r])) bw += l.bw_available;
      EXPECT_EQ(m.raw[r][1], bw);
      for (double v : m.values[r]) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Forward, UniformCases) {
  std::mt19937_64 rng(1);
  auto st = random_state(rng, 5);
  PolicyParams zero;
  zero.bias = 7.3;
  for (double p : forward(zero, *st)) EXPECT_NEAR(p, 0.2, 1e-15);

  StateMatrix same;
  same.node_ids = {0, 1, 2, 3};
  same.raw.assign(4, Features{1, 2, 3});
  same.values = normalize_columns(same.raw);
  PolicyParams any{{0.4, -2.0, 3.0}, 1.0};
  for (double p : forward(any, same)) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(Softmax, ThreeScoreExample) {
  const std::vector<double> z{1, 2, 3};
  auto p = softmax(z);
  EXPECT_NEAR(p[0], 0.0900, 5e-5);
  EXPECT_NEAR(p[1], 0.2447, 5e-5);
  EXPECT_NEAR(p[2], 0.6652, 5e-5);
  // independent evaluation
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  EXPECT_NEAR(p[0], e1 / (e1 + e2 + e3), 1e-15);
}

TEST(Softmax, ShiftInvariantPositiveAndStable) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 30);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(1 + rng() % 20);
    for (auto& x : z) x = n(rng);
    auto p = softmax(z);
    double sum = 0;
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    auto shifted = z;
    for (auto& x : shifted) x += 1234.5;
    auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
    EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), std::max_element(q.begin(), q.end()) - q.begin());
  }
  const std::vector<double> big{1000, 1001};
  auto p = softmax(big);
  EXPECT_TRUE(std::isfinite(p[0]) && std::isfinite(p[1]));
}

TEST(RankCandidates, Examples) {
  std::vector<int> ids{1, 2, 3};
  const std::vector<double> probs{0.5, 0.3, 0.2};
  const std::vector<bool> feasible{false, true, true};
  auto out = rank_by_priority(probs, ids, [&](std::size_t i) { return feasible[i]; });
  EXPECT_EQ(out, (std::vector<int>{2, 3}));

  const std::vector<double> flat{0.25, 0.25, 0.25};
  std::vector<int> shuffled{9, 4, 6};
  EXPECT_EQ(rank_by_priority(flat, shuffled, [](std::size_t) { return true; }), (std::vector<int>{4, 6, 9}));

  std::mt19937_64 rng(3);
  auto st = random_state(rng, 6);
  EXPECT_TRUE(rank_candidates(PolicyParams{}, *st, 1e9).empty());
}

TEST(RankCandidates, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(8);
    std::vector<int> ids(8);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = std::round(u(rng) * 4) / 4;  // coarse values force ties
      ids[i] = static_cast<int>(i * 3 % 8);
    }
    auto keep = [&](std::size_t i) { return ids[i] != 5; };
    auto base = rank_by_priority(p, ids, keep);
    std::vector<double> a, b, c;
    for (double x : p) {
      a.push_back(std::exp(3 * x) + 2);
      b.push_back(std::log1p(x));
      c.push_back(x * x * x);
    }
    EXPECT_EQ(rank_by_priority(a, ids, keep), base);
    EXPECT_EQ(rank_by_priority(b, ids, keep), base);
    EXPECT_EQ(rank_by_priority(c, ids, keep), base);
  }
}

TEST(EpisodeReward, Examples) {
  auto s = line_substrate({50, 50, 50}, {{0, 1, 30}, {1, 2, 30}});
  auto vnr = make_vnr(0, {10, 20}, {{0, 1, 15}}, 0, 5);
  auto two_hop = embed(s, vnr, {{0}, {2}});
  EXPECT_DOUBLE_EQ(episode_reward(two_hop.record), 0.75);

  auto t = line_substrate({50, 50}, {{0, 1, 30}});
  auto one_hop = embed(t, vnr, {{0}, {1}});
  EXPECT_EQ(episode_reward(one_hop.record), 1.0);

  EmbeddingRecord rejected;
  EXPECT_EQ(episode_reward(rejected), 0.0);
  EXPECT_EQ(episode_reward(rejected, -0.5), -0.5);
}

TEST(TrainStep, ZeroRewardsLeaveParamsUnchanged) {
  std::mt19937_64 rng(5);
  PolicyParams p{{0.1, -0.2, 0.3}, 0.05};
  auto batch = random_batch(rng, p);
  for (auto& t : batch) t.reward = 0;
  auto r = train_step(p, batch, 10.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.params, p);
}

TEST(TrainStep, SingleTraceGradientIsMinusGradLogP) {
  std::mt19937_64 rng(6);
  PolicyParams p{{0.3, -0.1, 0.7}, 0.2};
  auto st = random_state(rng, 5);
  std::vector<DecisionTrace> one{{{{st, 2, forward(p, *st)}}, 1.0}};
  auto g = loss_gradient(p, one, 0.0);
  const double eps = 1e-5;
  auto logp = [&](const PolicyParams& q) { return log_softmax(scores(q, *st))[2]; };
  for (std::size_t c = 0; c < 3; ++c) {
    auto up = p, dn = p;
    up.kernel[c] += eps;
    dn.kernel[c] -= eps;
    const double fd = -(logp(up) - logp(dn)) / (2 * eps);
    EXPECT_NEAR(g.kernel[c], fd, 1e-8);
  }
  EXPECT_NEAR(g.bias, 0.0, 1e-12);
}

TEST(TrainStep, FiniteDifferenceOnRandomBatches) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  const double eps = 1e-5;
  for (int trial = 0; trial < 30; ++trial) {
    PolicyParams p{{n(rng), n(rng), n(rng)}, n(rng)};
    auto batch = random_batch(rng, p);
    const double b = batch_baseline(batch);
    auto g = loss_gradient(p, batch, b);
    double diff = 0, na = 0, nn = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      auto up = p, dn = p;
      double& uu = k < 3 ? up.kernel[k] : up.bias;
      double& dd = k < 3 ? dn.kernel[k] : dn.bias;
      uu += eps;
      dd -= eps;
      const double fd = (local_loss(up, batch, b) - local_loss(dn, batch, b)) / (2 * eps);
      const double an = k < 3 ? g.kernel[k] : g.bias;
      diff += (an - fd) * (an - fd);
      na += an * an;
      nn += fd * fd;
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
    EXPECT_LT(rel, 1e-4) << "trial " << trial;
  }
}

TEST(TrainStep, DuplicateTracesKeepTheLoss) {
  std::mt19937_64 rng(8);
  PolicyParams p{{0.5, 0.1, -0.4}, 0};
  auto batch = random_batch(rng, p);
  std::vector<DecisionTrace> one{batch[0]};
  std::vector<DecisionTrace> two{batch[0], batch[0]};
  EXPECT_DOUBLE_EQ(local_loss(p, one, 0.25), local_loss(p, two, 0.25));
  EXPECT_THROW(train_step(p, std::vector<DecisionTrace>{}, 1.0), std::invalid_argument);
}

TEST(TrainStep, StepMovesAgainstTheGradient) {
  std::mt19937_64 rng(9);
  PolicyParams p{{0.2, 0.2, 0.2}, 0};
  auto batch = random_batch(rng, p);
  auto r = train_step(p, batch, 0.01);
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(r.sample_count, sample_count(batch));
  const double b = batch_baseline(batch);
  EXPECT_LT(local_loss(r.params, batch, b), local_loss(p, batch, b));
}

TEST(DomainAgent, TrainStagesUploadAndReceiveClearsIt) {
  std::mt19937_64 rng(10);
  DomainAgent a(2, PolicyParams{{0.1, 0.1, 0.1}, 0});
  EXPECT_FALSE(a.train_local(1.0));
  EXPECT_FALSE(a.upload());
  for (auto& t : random_batch(rng, a.params())) a.add_episode(t);
  const auto n = a.pending_episodes();
  ASSERT_TRUE(a.train_local(1.0));
  ASSERT_TRUE(a.upload());
  EXPECT_EQ(a.upload()->domain_id, 2);
  EXPECT_EQ(a.upload()->params, a.params());
  EXPECT_NEAR(a.upload()->reward_mean * static_cast<double>(n), a.upload()->reward_sum, 1e-12);
  EXPECT_EQ(a.pending_episodes(), 0u);
  PolicyParams g{{1, 2, 3}, 4};
  a.receive(g);
  EXPECT_EQ(a.params(), g);
  EXPECT_FALSE(a.upload());
}

TEST(HflPolicy, GreedyIsDeterministicAndFeasible) {
  auto s = generate_substrate(SubstrateConfig{}, 12);
  WorkloadConfig wc;
  wc.vnr_count = 20;
  auto stream = generate_vnr_stream(wc, 12);
  std::vector<PolicyParams> params(4, PolicyParams{{0.5, 1.0, 0.2}, 0});
  HflPolicy a(params), b(params);
  for (const auto& vnr : stream) {
    auto la = a.rank(s, vnr);
    EXPECT_EQ(la, b.rank(s, vnr));
    for (std::size_t v = 0; v < la.size(); ++v) {
      EXPECT_FALSE(la[v].empty());
      for (int n : la[v]) EXPECT_GE(s.node(n).cpu_available, vnr.node_demands[v]);
    }
  }
}

TEST(HflPolicy, FillsOneDomainBeforeTheNext) {
  auto s = generate_substrate(SubstrateConfig{}, 13);
  s.allocate_node(s.domain_nodes(0)[0], 40);  // domain 0 now has the least cpu
  std::vector<PolicyParams> params(4, PolicyParams{{1, 1, 1}, 0});
  HflPolicy p(params);
  auto vnr = make_vnr(0, {1, 1}, {{0, 1, 1}});
  auto lists = p.rank(s, vnr);
  double best = -1;
  int best_domain = -1;
  for (int d = 0; d < 4; ++d) {
    double cpu = 0;
    for (int n : s.domain_nodes(d)) cpu += s.node(n).cpu_available;
    if (cpu > best) best = cpu, best_domain = d;
  }
  ASSERT_EQ(lists[0].size(), 100u);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(s.node(lists[0][i]).domain_id, best_domain);
  // inside the domain, descending probability
  auto st = extract_state(s, best_domain);
  auto probs = forward(params[0], st);
  auto ranked = rank_by_priority(probs, st.node_ids, [](std::size_t) { return true; });
  EXPECT_EQ(std::vector<int>(lists[0].begin(), lists[0].begin() + 25), ranked);
}

TEST(HflPolicy, ExploreReportsOneTracePerDomainUsed) {
  auto s = generate_substrate(SubstrateConfig{}, 14);
  std::vector<PolicyParams> params(4, PolicyParams{{0.1, 0.1, 0.1}, 0});
  HflPolicy p(params, HflPolicy::Mode::explore, 99);
  std::vector<std::pair<int, DecisionTrace>> got;
  p.set_episode_sink([&](int d, DecisionTrace t) { got.emplace_back(d, std::move(t)); });
  auto vnr = make_vnr(0, {5, 5, 5}, {{0, 1, 3}, {1, 2, 3}}, 0, 10);
  auto res = embed(s, vnr, p.rank(s, vnr));
  ASSERT_TRUE(res.ok());
  p.observe(vnr, res.record);
  std::size_t decisions = 0;
  for (const auto& [d, t] : got) {
    decisions += t.decisions.size();
    EXPECT_DOUBLE_EQ(t.reward, res.record.revenue / res.record.cost);
    for (const auto& dec : t.decisions) {
      EXPECT_EQ(dec.state->domain_id, d);
      EXPECT_LT(dec.chosen_row, dec.state->rows());
      double sum = 0;
      for (double x : dec.probabilities) sum += x;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(decisions, 3u);
}

TEST(Checkpoint, RoundTripAndErrors) {
  Checkpoint c;
  c.domains = {{{0.1, -0.2, 1e-17}, 3}, {{1, 2, 3}, -4.5}};
  c.global = {{0.55, -0.1, 1.5}, -0.75};
  std::stringstream io;
  save_checkpoint(io, c);
  auto back = load_checkpoint(io);
  EXPECT_EQ(back.domains, c.domains);
  EXPECT_EQ(back.global, c.global);

  std::istringstream one_line("1 2 3 4\n");
  EXPECT_THROW(load_checkpoint(one_line), ValidationError);
  std::istringstream short_line("1 2 3 4\n1 2 3\n");
  EXPECT_THROW(load_checkpoint(short_line), ParseError);
  std::istringstream bad("1 2 3 4\n1 2 nan 4\n");
  EXPECT_THROW(load_checkpoint(bad), Error);
}
