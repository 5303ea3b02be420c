// survgen: train / generate / evaluate / simulate / report.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "survgen/checkpoint.hpp"
#include "survgen/config.hpp"
#include "survgen/dataset.hpp"
#include "survgen/evaluation.hpp"
#include "survgen/sampler.hpp"
#include "survgen/schema.hpp"
#include "survgen/simulate.hpp"
#include "survgen/trainer.hpp"

namespace fs = std::filesystem;
using namespace survgen;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::string config, data, schema, checkpoint, out, synthetic, km_dump;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_samples, steps, epochs;
  std::optional<double> t_admin, split;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI config file");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--out", o.out, "output file");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (const char* env = std::getenv("SURVGEN_OUT_DIR"); env && *env && c.out_dir == ".") c.out_dir = env;
  if (!o.data.empty()) c.data = o.data;
  if (!o.schema.empty()) c.schema = o.schema;
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  if (!o.synthetic.empty()) c.synthetic = o.synthetic;
  if (o.seed) c.seed = *o.seed;
  if (o.n_samples) c.sampler.n_samples = *o.n_samples;
  if (o.steps) c.sampler.steps = *o.steps;
  if (o.epochs) c.trainer.epochs = *o.epochs;
  if (o.t_admin) c.sampler.t_admin = *o.t_admin;
  if (o.split) c.eval.split = *o.split;
  c.propagate_seed();
  c.validate();
  return c;
}

std::string out_path(const Overrides& o, const RunConfig& c, const std::string& fallback) {
  if (!o.out.empty()) return o.out;
  return (fs::path(c.out_dir) / fallback).string();
}

std::string default_checkpoint(const RunConfig& c) {
  return c.checkpoint.empty() ? (fs::path(c.out_dir) / "checkpoint.json").string() : c.checkpoint;
}

std::string default_synthetic(const RunConfig& c) {
  return c.synthetic.empty() ? (fs::path(c.out_dir) / "synthetic.csv").string() : c.synthetic;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing ") + what);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  return os;
}

LoadedData load_data(const std::string& path, const FeatureSchema& schema) {
  try {
    return load_csv(path, schema);
  } catch (const RowError& e) {
    throw Error("data error: " + path + ": " + e.what());
  }
}

int cmd_train(const Overrides& o) {
  const RunConfig c = resolve(o);
  require(c.data, "data path (--data or paths.data)");
  require(c.schema, "schema path (--schema or paths.schema)");
  const FeatureSchema schema = load_schema(c.schema);
  const auto data = load_data(c.data, schema);
  const Split sp = split(data.records, c.eval.split, c.seed);
  const std::string hash = c.hash();
  const std::string ckpt = default_checkpoint(c);
  const std::string log_path = out_path(o, c, "train_log.jsonl");

  auto log = open_out(log_path);
  auto on_epoch = [&](const EpochLog& e) {
    nlohmann::json j{{"epoch", e.epoch},       {"L_disc", e.l_disc},
                     {"L_cont", e.l_cont},     {"L_surv", e.l_surv},
                     {"lambda_surv", e.lambda_surv}, {"L_total", e.l_total},
                     {"seed", c.seed},         {"config_hash", hash}};
    log << j.dump() << "\n";
  };
  TrainResult res = train(sp.train, schema, c.trainer, c.survival_loss(), c.schedule, on_epoch);
  res.model.codec.t_floor = c.t_floor;
  ensure_parent(ckpt);
  save_checkpoint(ckpt, res.model, {c.seed, hash});
  std::cout << "trained on " << sp.train.size() << " records for " << c.trainer.epochs << " epochs\n"
            << "lambda_surv (calibrated) = "
            << (res.state.lambda_calibrated ? format_double(*res.state.lambda_calibrated) : "n/a") << "\n"
            << "checkpoint " << ckpt << " (" << file_hash(ckpt) << ")\n"
            << "log " << log_path << "\n";
  return 0;
}

int cmd_generate(const Overrides& o) {
  const RunConfig c = resolve(o);
  const std::string ckpt = default_checkpoint(c);
  CheckpointInfo info;
  const TrainedModel model = load_checkpoint(ckpt, &info);
  if (!c.schema.empty() && !(load_schema(c.schema) == model.schema))
    throw SchemaError("schema '" + c.schema + "' does not match checkpoint '" + ckpt + "'");
  const SampleResult res = sample(model, c.sampler);
  const std::string out = o.out.empty() ? default_synthetic(c) : o.out;
  auto os = open_out(out);
  write_csv(os, model.schema, res.records,
            {"survgen synthetic cohort", "seed=" + std::to_string(c.seed), "config_hash=" + c.hash(),
             "checkpoint_hash=" + file_hash(ckpt), "steps=" + std::to_string(c.sampler.steps),
             "n_samples=" + std::to_string(c.sampler.n_samples),
             "t_admin=" + (c.sampler.t_admin ? format_double(*c.sampler.t_admin) : std::string("none"))});
  std::cout << "wrote " << res.records.size() << " rows to " << out;
  if (res.forced_unmask) std::cout << " (" << res.forced_unmask << " residual masks resolved)";
  if (res.clamped_times) std::cout << " (" << res.clamped_times << " times clamped)";
  std::cout << "\n";
  return 0;
}

int cmd_evaluate(const Overrides& o) {
  const RunConfig c = resolve(o);
  require(c.data, "real data path (--data or paths.data)");
  require(c.schema, "schema path (--schema or paths.schema)");
  const FeatureSchema schema = load_schema(c.schema);
  const auto real = load_data(c.data, schema);
  const auto syn = load_data(default_synthetic(c), schema);
  const Split sp = split(real.records, c.eval.split, c.seed);
  EvalOptions opt;
  opt.brier_horizon = c.eval.brier_horizon;
  opt.rmst_horizon = c.eval.rmst_horizon;
  opt.seed = c.seed;
  const EvalReport rep = tstr_evaluate(sp.train, sp.test, syn.records, schema, opt);
  nlohmann::json j = to_json(rep);
  j["metadata"]["config_hash"] = c.hash();
  const std::string out = out_path(o, c, "report.json");
  auto os = open_out(out);
  os << j.dump(2) << "\n";
  if (!o.km_dump.empty()) {
    auto km = open_out(o.km_dump);
    write_km_csv(km, sp.train, syn.records);
  }
  std::cout << j["metrics"].dump(2) << "\n";
  if (!rep.failures.empty()) std::cout << "failed metrics: " << j["failures"].dump() << "\n";
  return 0;
}

int cmd_simulate(const Overrides& o) {
  if (o.config.empty()) throw ConfigError("simulate needs --config with a [world] section");
  WorldConfig w = load_world_config(o.config);
  if (o.seed) w.seed = *o.seed;
  if (o.n_samples) w.n = *o.n_samples;
  const SimulatedCohort sim = simulate(w);
  std::string out = o.out;
  if (out.empty()) {
    const char* env = std::getenv("SURVGEN_OUT_DIR");
    out = (fs::path(env && *env ? env : ".") / "simulated.csv").string();
  }
  auto os = open_out(out);
  write_csv(os, sim.schema, sim.records,
            {"survgen simulated cohort", "seed=" + std::to_string(w.seed),
             "censoring_rate=" + format_double(sim.censoring_rate)});
  const std::string schema_path = fs::path(out).replace_extension(".schema.ini").string();
  auto ss = open_out(schema_path);
  write_schema(ss, sim.schema);
  std::cout << "wrote " << sim.records.size() << " rows to " << out << " (schema " << schema_path
            << ", censoring rate " << format_double(sim.censoring_rate) << ")\n";
  return 0;
}

int cmd_report(const Overrides& o) {
  if (!o.checkpoint.empty()) {
    CheckpointInfo info;
    const TrainedModel m = load_checkpoint(o.checkpoint, &info);
    nlohmann::json j{{"checkpoint", o.checkpoint},
                     {"file_hash", file_hash(o.checkpoint)},
                     {"schema_hash", m.schema.hash()},
                     {"seed", info.seed},
                     {"config_hash", info.config_hash},
                     {"parameters", m.params.parameter_count()},
                     {"covariates", m.schema.columns.size()},
                     {"tau", m.surv.tau},
                     {"alpha_decay", m.surv.alpha_decay}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  const RunConfig c = resolve(o);
  std::cout << c.to_ini() << "\n# config_hash = " << c.hash() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-based generator for mixed-type survival data"};
  app.require_subcommand(1);
  Overrides o;

  auto* train = app.add_subcommand("train", "fit a model on the training split and write a checkpoint");
  add_common(train, o);
  train->add_option("--data", o.data, "real CSV");
  train->add_option("--schema", o.schema, "schema INI");
  train->add_option("--checkpoint", o.checkpoint, "checkpoint to write");
  train->add_option("--epochs", o.epochs, "training epochs");
  train->add_option("--split", o.split, "training share of the data");

  auto* gen = app.add_subcommand("generate", "sample a synthetic cohort from a checkpoint");
  add_common(gen, o);
  gen->add_option("--checkpoint", o.checkpoint, "checkpoint to read");
  gen->add_option("--schema", o.schema, "optional schema to check against the checkpoint");
  gen->add_option("--n-samples", o.n_samples, "rows to generate");
  gen->add_option("--steps", o.steps, "reverse diffusion steps");
  gen->add_option("--t-admin", o.t_admin, "administrative censoring time");

  auto* eval = app.add_subcommand("evaluate", "compare a synthetic cohort against real data");
  add_common(eval, o);
  eval->add_option("--data", o.data, "real CSV");
  eval->add_option("--schema", o.schema, "schema INI");
  eval->add_option("--synthetic", o.synthetic, "synthetic CSV");
  eval->add_option("--split", o.split, "training share of the real data");
  eval->add_option("--km-dump", o.km_dump, "write both Kaplan-Meier curves to this CSV");

  auto* sim = app.add_subcommand("simulate", "draw a cohort from a parametric survival world");
  add_common(sim, o);
  sim->add_option("--n-samples", o.n_samples, "cohort size (overrides world.n)");

  auto* rep = app.add_subcommand("report", "print the resolved config or checkpoint metadata");
  add_common(rep, o);
  rep->add_option("--checkpoint", o.checkpoint, "checkpoint to describe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (gen->parsed()) return cmd_generate(o);
    if (eval->parsed()) return cmd_evaluate(o);
    if (sim->parsed()) return cmd_simulate(o);
    if (rep->parsed()) return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
