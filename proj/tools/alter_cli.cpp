// alter: synth | encode | train | eval | sweep | attn
//
// Every subcommand is deterministic given its config and seed. Outputs are
// plain CSV/JSON/PGM (checkpoints are the one binary format). On failure the
// partially written output directory is removed if this invocation created
// it.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "alter/io.hpp"
#include "alter/pipeline.hpp"
#include "alter/threads.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct OutputGuard {
  std::string dir;
  bool created = false;
  bool armed = false;

  void arm(const std::string& path) {
    dir = path;
    created = !path.empty() && !fs::exists(path);
    armed = true;
  }
  void cleanup_on_failure() {
    if (armed && created && !dir.empty()) {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  }
};

// Start from the full default config so --set can reference any declared
// key, merge the user file over it, and let the converters reject unknowns.
json merged_config(const json& defaults, const std::string& path) {
  json full = defaults;
  if (!path.empty()) full.merge_patch(json::parse(alter::io::read_file(path)));
  return full;
}

void apply_sets(json& config, const std::vector<std::string>& sets) {
  for (const std::string& s : sets) alter::pipeline::apply_override(config, s);
}

std::vector<int> parse_hops_list(const std::string& csv) {
  std::vector<int> hops;
  size_t pos = 0;
  while (pos <= csv.size()) {
    size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    const std::string tok = csv.substr(pos, comma - pos);
    if (!tok.empty()) hops.push_back(std::stoi(tok));
    pos = comma + 1;
    if (comma == csv.size()) break;
  }
  if (hops.empty()) throw std::invalid_argument("--hops: empty list");
  return hops;
}

void print_metrics(const alter::Metrics& m) {
  std::cout << "acc=" << m.acc << " auc=" << m.auc << " sen=" << m.sen << " spe=" << m.spe
            << " f1=" << m.f1 << " (tp=" << m.tp << " fp=" << m.fp << " tn=" << m.tn
            << " fn=" << m.fn << ")\n";
}

std::string sibling_config(const std::string& ckpt) {
  return (fs::path(ckpt).parent_path() / "config.json").string();
}

}  // namespace

int main(int argc, char** argv) {
  alter::threads::apply_env_cap();

  CLI::App app{"ALTER: adaptive long-range aware brain-graph transformer pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, ckpt_path, subject_id, split = "test";
  std::string hops_csv = "2,4,8,16,32";
  std::vector<std::string> sets;
  uint64_t seed = 0;
  bool seed_given = false, per_head = false;
  int n_seeds = 5;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    cmd->add_option("--config", config_path, "JSON config file");
    if (with_out) cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--set", sets, "override a config key (key=value, repeatable)");
    cmd->add_option_function<uint64_t>(
        "--seed", [&](uint64_t v) { seed = v; seed_given = true; }, "seed override");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic planted-structure dataset");
  add_common(synth, true);

  CLI::App* encode = app.add_subcommand("encode", "write per-subject X/A/F/E caches");
  add_common(encode, true);
  encode->add_option("--data", data_dir, "dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a model and write a run directory");
  add_common(train, true);
  train->get_option("--config")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--config", config_path, "run config (default: config.json beside ckpt)");
  eval->add_option("--split", split, "train|val|test (default test)");
  eval->add_option("--out", out_dir, "optional directory for metrics.json");

  CLI::App* sweep = app.add_subcommand("sweep", "train across hop counts and summarize");
  add_common(sweep, true);
  sweep->get_option("--config")->required();
  sweep->add_option("--hops", hops_csv, "comma-separated hop counts (default 2,4,8,16,32)");
  sweep->add_option("--seeds", n_seeds, "number of seeds per hop count (default 5)");

  CLI::App* attn = app.add_subcommand("attn", "export attention scores for one subject");
  attn->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  attn->add_option("--config", config_path, "run config (default: config.json beside ckpt)");
  attn->add_option("--subject", subject_id, "subject id")->required();
  attn->add_option("--out", out_dir, "output directory")->required();
  attn->add_flag("--per-head", per_head, "also export each head of the last layer");

  CLI11_PARSE(app, argc, argv);

  OutputGuard guard;
  try {
    if (synth->parsed()) {
      guard.arm(out_dir);
      json full = merged_config(alter::pipeline::synth_config_to_json({}), config_path);
      apply_sets(full, sets);
      if (seed_given) full["seed"] = seed;
      alter::SynthConfig cfg = alter::pipeline::synth_config_from_json(full);
      alter::write_synth_dataset(cfg, out_dir);
      std::cout << "wrote " << 2 * cfg.subjects_per_class << " subjects to " << out_dir << "\n";
    } else if (encode->parsed()) {
      guard.arm(out_dir);
      json full = {{"threshold", 0.3}, {"hops", 16}, {"renormalize", false}};
      if (!config_path.empty()) {
        json file = json::parse(alter::io::read_file(config_path));
        for (auto it = file.begin(); it != file.end(); ++it) {
          if (!full.contains(it.key()))
            throw std::invalid_argument("encode config: unknown key '" + it.key() + "'");
          full[it.key()] = it.value();
        }
      }
      apply_sets(full, sets);
      alter::pipeline::EncodeOptions opt;
      opt.threshold = full.at("threshold").get<double>();
      opt.hops = full.at("hops").get<int>();
      opt.renormalize = full.at("renormalize").get<bool>();
      alter::pipeline::write_encode_cache(data_dir, out_dir, opt);
      std::cout << "encoded caches written to " << out_dir << "\n";
    } else if (train->parsed()) {
      guard.arm(out_dir);
      json full = merged_config(alter::pipeline::run_config_to_json({}), config_path);
      apply_sets(full, sets);
      if (seed_given) full["train"]["seed"] = seed;
      alter::pipeline::RunConfig cfg = alter::pipeline::run_config_from_json(full);
      alter::RunRecord record = alter::pipeline::run_training(cfg, out_dir);
      std::cout << "best epoch " << record.best_epoch << " (val auc " << record.best_val_auc
                << "); test: ";
      print_metrics(record.test);
    } else if (eval->parsed()) {
      if (config_path.empty()) config_path = sibling_config(ckpt_path);
      alter::Metrics m = alter::pipeline::run_eval(ckpt_path, config_path, split);
      print_metrics(m);
      if (!out_dir.empty()) {
        guard.arm(out_dir);
        alter::io::ensure_dir(out_dir);
        alter::io::write_file(out_dir + "/metrics.json",
                              alter::pipeline::metrics_to_json(m).dump(2) + "\n");
      }
    } else if (sweep->parsed()) {
      guard.arm(out_dir);
      json full = merged_config(alter::pipeline::run_config_to_json({}), config_path);
      apply_sets(full, sets);
      if (seed_given) full["train"]["seed"] = seed;
      alter::pipeline::RunConfig cfg = alter::pipeline::run_config_from_json(full);
      std::vector<int> hops = parse_hops_list(hops_csv);
      auto rows = alter::pipeline::run_sweep(cfg, hops, n_seeds, out_dir);
      std::cout << "hops  auc(mean±std)   acc(mean±std)\n";
      for (const auto& row : rows)
        std::cout << row.hops << "  " << row.summary.auc.mean << "±" << row.summary.auc.std_dev
                  << "  " << row.summary.acc.mean << "±" << row.summary.acc.std_dev << "\n";
    } else if (attn->parsed()) {
      if (config_path.empty()) config_path = sibling_config(ckpt_path);
      guard.arm(out_dir);
      alter::pipeline::run_attention_export(ckpt_path, config_path, subject_id, per_head,
                                            out_dir);
      std::cout << "attention exports written to " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    guard.cleanup_on_failure();
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
