#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mcsc/error.hpp"
#include "mcsc/io.hpp"
#include "mcsc/pipeline.hpp"
#include "mcsc/report.hpp"

namespace {

using namespace mcsc;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<std::string> out;
};

pipeline::PipelineConfig load(const Options& o) {
  io::Json doc;
  try {
    doc = io::read_json(o.config);
  } catch (const Error& e) {
    throw pipeline::StageError("config", e);
  }
  pipeline::Overrides ov;
  if (const char* env = std::getenv("MCSC_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      ov.seed = std::stoull(env, &used);
      if (env[used] != '\0') throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw pipeline::StageError("config", Error(ErrorCode::invalid_argument, std::string("MCSC_SEED is not an unsigned integer: ") + env));
    }
  }
  if (o.seed) ov.seed = o.seed;
  ov.lambda1 = o.lambda1;
  ov.lambda2 = o.lambda2;
  if (o.out) ov.output_dir = *o.out;
  pipeline::apply_overrides(doc, ov);
  return pipeline::PipelineConfig::from_json(doc);
}

void print_stages(const pipeline::Workspace& ws) {
  for (const auto& s : ws.stages) std::cout << s.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov chain sparse control: estimate a transition matrix from longitudinal data and "
               "find a sparse set of transitions to suppress."};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Seed for every random stage (overrides MCSC_SEED and the config)");
    sub->add_option("--lambda1", opt.lambda1, "Sparsity weight")->check(CLI::NonNegativeNumber);
    sub->add_option("--lambda2", opt.lambda2, "Log fold-change weight")->check(CLI::NonNegativeNumber);
    sub->add_option("-o,--out", opt.out, "Output directory");
  };

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"simulate", "Simulate the configured benchmark model"},
      {"discretize", "Partition the state space and label the data"},
      {"estimate", "Estimate the transition matrix and its stationary distribution"},
      {"control", "Run the greedy sparse controller"},
      {"evolve", "Evolve distributions with and without control"},
      {"report", "Write plot-ready CSVs from a finished run"},
      {"pipeline", "Run every stage in order"},
  };
  std::map<std::string, CLI::App*> cmd;
  for (const auto& s : subs) {
    cmd[s.name] = app.add_subcommand(s.name, s.help);
    add_common(cmd[s.name]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    pipeline::Workspace ws(load(opt));
    if (cmd["simulate"]->parsed()) {
      if (ws.config.input != pipeline::PipelineConfig::Input::model)
        throw pipeline::StageError("input", Error(ErrorCode::schema_error, "simulate needs input.model"));
      pipeline::stage_input(ws);
    } else if (cmd["discretize"]->parsed()) {
      pipeline::stage_discretize(ws);
    } else if (cmd["estimate"]->parsed()) {
      pipeline::stage_estimate(ws);
    } else if (cmd["control"]->parsed()) {
      if (!ws.config.control_enabled)
        throw pipeline::StageError("control", Error(ErrorCode::schema_error, "control is disabled in the config"));
      pipeline::stage_control(ws);
    } else if (cmd["evolve"]->parsed()) {
      pipeline::stage_evolve(ws);
    } else if (cmd["report"]->parsed()) {
      try {
        for (const auto& p : report::emit_report(ws.config.output_dir)) std::cout << p.string() << '\n';
      } catch (const Error& e) {
        throw pipeline::StageError("report", e);
      }
      return 0;
    } else {
      const auto summary = pipeline::run_pipeline(ws.config);
      std::cout << "states: " << summary.value("states", 0) << '\n';
      if (summary.contains("interventions")) std::cout << "interventions: " << summary["interventions"] << '\n';
      std::cout << "summary: " << (ws.config.output_dir / pipeline::files::summary).string() << '\n';
      return 0;
    }
    print_stages(ws);
  } catch (const pipeline::StageError& e) {
    std::cerr << "error [stage=" << e.stage() << " code=" << to_string(e.code()) << "] " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error [code=" << to_string(e.code()) << "] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
