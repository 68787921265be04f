// hflvne: generate workloads, train the federated agents, evaluate and
// compare policies, and re-check decision logs.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error (including
// a decision log that fails validation).

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hflvne/hflvne.hpp"

namespace fs = std::filesystem;
using namespace hflvne;

namespace {

constexpr const char* kConfigEnv = "HFLVNE_CONFIG";

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, std::string("config file (default: $") + kConfigEnv + ")");
  cmd->add_option("--set", o.sets, "override one config key, key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "run seed");
}

ExperimentConfig load_config(const CommonOptions& o) {
  ExperimentConfig cfg;
  std::string path = o.config_path;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnv)) path = env;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    cfg = parse_config(in, path);
  }
  for (const auto& s : o.sets) apply_assignment(cfg, s);
  if (o.seed) cfg.seed = *o.seed;
  if (o.policy) cfg.policy = *o.policy;
  validate_config(cfg);
  return cfg;
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::ofstream create(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return text::open_output(p.string());
}

Split pick_split(const VnrStream& stream, const ExperimentConfig& cfg, const std::string& which) {
  if (which == "train") return train_split(stream, cfg);
  if (which == "test") return test_split(stream, cfg);
  return slice(stream, 0, stream.size());
}

std::string summary_line(const std::string& policy, std::size_t n, const Summary& s, double wall_ms) {
  std::ostringstream ss;
  ss << "policy=" << policy << " vnrs=" << n << " ltar=" << text::fmt(s.ltar) << " ltar2c=" << text::fmt(s.ltar2c)
     << " acc=" << text::fmt(s.acc) << " wall_ms=" << text::fmt(wall_ms);
  return ss.str();
}

struct Inputs {
  std::string substrate = "substrate.txt";
  std::string vnrs = "vnrs.txt";
};

void add_inputs(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--substrate", in.substrate, "substrate file")->capture_default_str();
  cmd->add_option("--vnrs", in.vnrs, "VNR stream file")->capture_default_str();
}

int cmd_generate(const ExperimentConfig& cfg, const fs::path& out) {
  auto sc = generate_scenario(cfg);
  const auto sp = out / "substrate.txt", vp = out / "vnrs.txt";
  {
    auto f = create(sp);
    save_substrate(f, sc.substrate);
  }
  {
    auto f = create(vp);
    save_vnrs(f, sc.stream);
  }
  for (const auto& p : {sp, vp}) std::cout << sha256_file(p) << "  " << p.string() << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const Inputs& in, const fs::path& out) {
  const auto substrate = load_substrate_file(in.substrate);
  const auto stream = load_vnrs_file(in.vnrs);
  const auto split = train_split(stream, cfg);
  if (split.requests.empty()) throw Error("training split is empty");
  auto rounds = create(out / "rounds.csv");
  auto run = train_federated(substrate, split, cfg, &rounds);
  {
    auto f = create(out / "checkpoint.txt");
    save_checkpoint(f, run.checkpoint);
  }
  {
    auto f = create(out / "epochs.csv");
    write_epoch_csv(f, run.epochs);
  }
  const auto& last = run.epochs.back().metrics;
  std::cout << "epochs=" << run.epochs.size() << " rounds=" << run.rounds.size()
            << " final_ltar2c=" << text::fmt(last.ltar2c) << " final_acc=" << text::fmt(last.acc)
            << " wall_ms_per_round=" << text::fmt(run.wall_ms_per_round) << '\n';
  return 0;
}

std::optional<Checkpoint> maybe_checkpoint(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto f = text::open_input(path);
  return load_checkpoint(f, path);
}

int cmd_evaluate(const ExperimentConfig& cfg, const Inputs& in, const std::string& checkpoint_path,
                 const std::string& which, const fs::path& out) {
  const auto substrate = load_substrate_file(in.substrate);
  const auto stream = load_vnrs_file(in.vnrs);
  const auto ck = maybe_checkpoint(checkpoint_path);
  auto policy = make_policy(cfg.policy, cfg, ck ? &*ck : nullptr, substrate.num_domains());
  const auto split = pick_split(stream, cfg, which);
  auto ev = evaluate_policy(substrate, split, *policy, cfg.sample_interval);
  {
    auto f = create(out / "timeseries.csv");
    write_series_csv(f, ev.series);
  }
  {
    auto f = create(out / "decisions.csv");
    write_decision_log(f, split.requests, ev.result.records);
  }
  std::cout << summary_line(ev.policy, split.requests.size(), ev.summary, ev.wall_ms) << '\n';
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_compare(const ExperimentConfig& cfg, const Inputs& in, const std::string& checkpoint_path,
                const std::string& policies, const fs::path& out) {
  const auto substrate = load_substrate_file(in.substrate);
  const auto stream = load_vnrs_file(in.vnrs);
  const auto names = split_list(policies);
  if (names.empty()) throw ConfigError("--policies is empty");
  for (const auto& n : names)
    if (n != "hfl" && n != "noderank" && n != "random") throw ConfigError("unknown policy '" + n + "'");

  // Without a checkpoint the hfl entry is trained here from the same config.
  auto ck = maybe_checkpoint(checkpoint_path);
  if (!ck && std::find(names.begin(), names.end(), "hfl") != names.end())
    ck = train_federated(substrate, train_split(stream, cfg), cfg).checkpoint;

  const auto split = test_split(stream, cfg);
  std::vector<Evaluation> evals;
  for (const auto& n : names) {
    auto policy = make_policy(n, cfg, ck ? &*ck : nullptr, substrate.num_domains());
    evals.push_back(evaluate_policy(substrate, split, *policy, cfg.sample_interval));
  }

  // Column headers repeat the policy name; a repeated policy gets a suffix.
  std::vector<std::string> cols;
  std::map<std::string, int> seen;
  for (const auto& n : names) cols.push_back(seen[n]++ ? n + "_" + std::to_string(seen[n] - 1) : n);

  using Field = double SeriesPoint::*;
  const std::pair<const char*, Field> metrics[] = {
      {"ltar", &SeriesPoint::ltar}, {"ltar2c", &SeriesPoint::ltar2c}, {"acc", &SeriesPoint::acc}};
  for (const auto& [metric, field] : metrics) {
    auto f = create(out / (std::string(metric) + ".csv"));
    f << 't';
    for (const auto& c : cols) f << ',' << c;
    f << '\n';
    const auto& base = evals.front().series;
    for (std::size_t i = 0; i < base.size(); ++i) {
      f << text::fmt(base[i].t);
      for (const auto& e : evals) f << ',' << text::fmt(e.series[i].*field);
      f << '\n';
    }
  }

  auto f = create(out / "summary.csv");
  f << "policy,ltar,ltar2c,acc,wall_ms_per_round\n";
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const auto& e = evals[i];
    const double per_round = split.requests.empty() ? 0.0 : e.wall_ms / static_cast<double>(split.requests.size());
    f << cols[i] << ',' << text::fmt(e.summary.ltar) << ',' << text::fmt(e.summary.ltar2c) << ','
      << text::fmt(e.summary.acc) << ',' << text::fmt(per_round) << '\n';
    std::cout << summary_line(cols[i], split.requests.size(), e.summary, e.wall_ms) << '\n';
  }
  return 0;
}

int cmd_validate(const Inputs& in, const std::string& log_path) {
  const auto substrate = load_substrate_file(in.substrate);
  const auto stream = load_vnrs_file(in.vnrs);
  auto f = text::open_input(log_path);
  const auto rows = read_decision_log(f, log_path);

  std::map<int, const VirtualNetworkRequest*> by_id;
  for (const auto& v : stream) by_id[v.vnr_id] = &v;
  VnrStream used;
  std::vector<EmbeddingRecord> records;
  std::vector<std::string> extra;
  for (const auto& row : rows) {
    auto it = by_id.find(row.record.vnr_id);
    if (it == by_id.end()) throw ValidationError(log_path + ": vnr " + std::to_string(row.record.vnr_id) + " is not in " + in.vnrs);
    const auto& vnr = *it->second;
    if (row.t_s != vnr.t_s || row.t_e != vnr.t_e)
      extra.push_back("vnr " + std::to_string(vnr.vnr_id) + ": logged times differ from the stream");
    for (std::size_t e = 0; e < row.hops.size() && e < row.record.link_paths.size(); ++e)
      if (row.hops[e] != row.record.link_paths[e].size())
        extra.push_back("vnr " + std::to_string(vnr.vnr_id) + ": hop count of link " + std::to_string(e) + " disagrees with its path");
    used.push_back(vnr);
    records.push_back(row.record);
  }
  auto report = validate_run(substrate, used, records);
  report.violations.insert(report.violations.end(), extra.begin(), extra.end());
  for (const auto& v : report.violations) std::cout << "violation: " << v << '\n';
  std::cout << "checked=" << report.checked << " accepted=" << report.accepted
            << " violations=" << report.violations.size() << '\n';
  return report.ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-domain virtual network embedding with federated policy-gradient agents"};
  app.require_subcommand(1);

  CommonOptions common;
  Inputs inputs;
  std::string out = ".", checkpoint, which = "test", policies = "hfl,noderank,random", log_path;

  auto* gen = app.add_subcommand("generate", "write substrate.txt and vnrs.txt");
  add_common(gen, common);
  gen->add_option("--out", out, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "federated training on the training split");
  add_common(train, common);
  add_inputs(train, inputs);
  train->add_option("--out", out, "output directory")->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "run one frozen policy");
  add_common(eval, common);
  add_inputs(eval, inputs);
  eval->add_option("--policy", common.policy, "hfl, noderank or random");
  eval->add_option("--checkpoint", checkpoint, "checkpoint for the hfl policy");
  eval->add_option("--split", which, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
  eval->add_option("--out", out, "output directory")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "run several policies on the test split");
  add_common(cmp, common);
  add_inputs(cmp, inputs);
  cmp->add_option("--policies", policies, "comma-separated policy list")->capture_default_str();
  cmp->add_option("--checkpoint", checkpoint, "checkpoint for hfl; trained on the fly when absent");
  cmp->add_option("--out", out, "output directory")->capture_default_str();

  auto* val = app.add_subcommand("validate", "re-check a decision log against the substrate and stream");
  add_inputs(val, inputs);
  val->add_option("--log", log_path, "decision log CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*val) return cmd_validate(inputs, log_path);
    const auto cfg = load_config(common);
    if (*gen) return cmd_generate(cfg, out);
    if (*train) return cmd_train(cfg, inputs, out);
    if (*eval) return cmd_evaluate(cfg, inputs, checkpoint, which, out);
    if (*cmp) return cmd_compare(cfg, inputs, checkpoint, policies, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
