#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "adjoint_flow/experiments.hpp"

namespace {

struct Job {
  std::string config_path;
  int exit_code = adjoint_flow::exit_error;
  std::string run_dir;
  std::string message;
};

void run_job(const std::string& subcommand, const std::vector<std::string>& overrides, const std::string& out,
             Job& job) {
  try {
    const std::string text = adjoint_flow::read_file(job.config_path);
    const adjoint_flow::ExperimentResult res = adjoint_flow::run_experiment(subcommand, text, overrides, out);
    job.exit_code = res.exit_code;
    job.run_dir = res.run_dir;
    for (const auto& [k, v] : res.report.entries())
      if (k.rfind("check.", 0) == 0 || k == "status") job.message += " " + k + "=" + v;
  } catch (const std::exception& e) {
    job.exit_code = adjoint_flow::exit_error;
    job.message = std::string(" error: ") + e.what();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online adjoint optimization experiments"};
  app.require_subcommand(1);

  std::vector<std::string> configs, overrides;
  const char* env_out = std::getenv("ADJOINT_FLOW_OUT");
  std::string out = env_out && *env_out ? env_out : "runs";
  unsigned jobs = 1;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"run", "online adjoint run on the linear elliptic problem"},
      {"baseline", "offline adjoint gradient descent and cost comparison"},
      {"burgers", "online parameter recovery for the steady Burgers problem"},
      {"gradcheck", "adjoint gradient against central finite differences"},
      {"rates", "log-log rate fit over an existing trace CSV"},
      {"schedule", "learning-rate schedule compliance report"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", configs, "config file (repeatable)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output root (default $ADJOINT_FLOW_OUT or ./runs)");
    sub->add_option("--jobs", jobs, "configs run concurrently")->check(CLI::PositiveNumber);
    sub->add_option("--override", overrides, "section.key=value (repeatable)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  std::vector<Job> work(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) work[i].config_path = configs[i];

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) run_job(subcommand, overrides, out, work[i]);
  };
  const unsigned n_threads = std::min<unsigned>(jobs, static_cast<unsigned>(work.size()));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  bool any_error = false, any_threshold = false;
  for (const Job& j : work) {
    std::printf("%s -> %s exit=%d%s\n", j.config_path.c_str(), j.run_dir.empty() ? "-" : j.run_dir.c_str(), j.exit_code,
                j.message.c_str());
    any_error = any_error || j.exit_code == adjoint_flow::exit_error;
    any_threshold = any_threshold || j.exit_code == adjoint_flow::exit_threshold;
  }
  if (any_error) return adjoint_flow::exit_error;
  return any_threshold ? adjoint_flow::exit_threshold : adjoint_flow::exit_ok;
}
