// Copyright 2026 The Q8s Kernel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "q8s/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <mutex>
#include <regex>
#include <thread>

#include "CLI11.hpp"
#include "q8s/cluster/kubeconfig.hpp"
#include "q8s/common/fs.hpp"
#include "q8s/fake/fake_cluster.hpp"
#include "q8s/image/image_builder.hpp"
#include "q8s/kernel/connection_info.hpp"
#include "q8s/kernel/kernel_server.hpp"

namespace q8s::cli {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;
using nlohmann::ordered_json;
using orchestrator::ExecutionState;
using orchestrator::TerminalPhase;

constexpr auto kSignalPoll = 50ms;

// Reported as exit 64 with the message on stderr.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string kubeconfig;
  std::string ns;
  std::string base_image{orchestrator::kDefaultBaseImage};
  std::string registry{orchestrator::kDefaultRegistry};
  int gpu = 1;
  std::string poll_interval = "2s";
  std::string timeout = "1h";
  std::string output = "text";
  std::optional<std::uint64_t> seed;
  std::string build_tool = "docker";
  std::string cache_file;
};

void add_cluster_flags(CLI::App *cmd, Flags &f) {
  cmd->add_option("--kubeconfig", f.kubeconfig, "Cluster access file")->envname("KUBECONFIG");
  cmd->add_option("--namespace", f.ns, "Target namespace (default: the context's)")
      ->envname("Q8S_NAMESPACE");
}

void add_image_flags(CLI::App *cmd, Flags &f) {
  cmd->add_option("--base-image", f.base_image, "Image the payload image builds on")
      ->envname("Q8S_BASE_IMAGE")
      ->capture_default_str();
  cmd->add_option("--registry", f.registry, "Registry prefix images are pushed to")
      ->envname("Q8S_REGISTRY")
      ->capture_default_str();
  cmd->add_option("--gpu", f.gpu, "GPUs requested per job; 0 requests none")
      ->check(CLI::Validator(
          [](std::string &v) {
            return v.find('-') == std::string::npos ? std::string() : "must be >= 0";
          },
          "INT>=0"))
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for object-name suffixes");
}

void add_execution_flags(CLI::App *cmd, Flags &f) {
  cmd->add_option("--poll-interval", f.poll_interval, "Job status poll interval")
      ->capture_default_str();
  cmd->add_option("--timeout", f.timeout, "Limit on Pending plus Running")->capture_default_str();
  cmd->add_option("--build-tool", f.build_tool,
                  "docker-compatible build CLI, or 'none' to assume images exist")
      ->envname("Q8S_BUILD_TOOL")
      ->capture_default_str();
  cmd->add_option("--cache-file", f.cache_file, "Where built image digests are remembered")
      ->envname("Q8S_CACHE_FILE");
}

void add_output_flag(CLI::App *cmd, Flags &f) {
  cmd->add_option("--output", f.output, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
}

CliConfig to_config(const Flags &f) {
  CliConfig c;
  if (!f.kubeconfig.empty()) c.kubeconfig_path = f.kubeconfig;
  if (!f.ns.empty()) c.namespace_name = f.ns;
  c.base_image = f.base_image;
  c.registry = f.registry;
  c.gpu_count = f.gpu;
  try {
    c.poll_interval = parse_duration(f.poll_interval);
    c.timeout = parse_duration(f.timeout);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
  c.output = f.output == "json" ? OutputFormat::Json : OutputFormat::Text;
  c.seed = f.seed;
  c.build_tool = f.build_tool;
  if (!f.cache_file.empty()) c.cache_file = f.cache_file;
  return c;
}

orchestrator::ExecutionOptions to_options(const CliConfig &c) {
  orchestrator::ExecutionOptions o;
  o.base_image = c.base_image;
  o.registry = c.registry;
  o.gpu_count = c.gpu_count;
  o.poll_interval = c.poll_interval;
  o.timeout = c.timeout;
  return o;
}

cluster::ClusterConfig load_cluster(const CliConfig &c) {
  if (!c.kubeconfig_path) {
    throw UsageError("no kubeconfig: pass --kubeconfig or set KUBECONFIG");
  }
  auto cfg = cluster::load_kubeconfig(*c.kubeconfig_path);
  if (c.namespace_name) {
    cfg.namespace_name = *c.namespace_name;
    cluster::validate(cfg);
  }
  return cfg;
}

std::string read_payload(const std::string &path) {
  auto text = common::read_file(path);
  if (!text) throw UsageError("cannot read " + path);
  return *text;
}

std::optional<fs::path> default_cache_file() {
  if (const char *xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
    return fs::path(xdg) / "q8s" / "image-digests";
  }
  if (const char *home = std::getenv("HOME"); home && *home) {
    return fs::path(home) / ".cache" / "q8s" / "image-digests";
  }
  return std::nullopt;
}

// Driver and digest cache for one invocation.
struct BuildSetup {
  explicit BuildSetup(const CliConfig &c, const Environment &env) {
    if (env.driver) {
      driver = env.driver;
    } else if (c.build_tool == "none") {
      owned = std::make_unique<image::RecordingDriver>();
      driver = owned.get();
    } else {
      owned = std::make_unique<image::SubprocessDriver>(c.build_tool);
      driver = owned.get();
    }
    auto file = c.cache_file;
    if (!file && !env.driver && c.build_tool != "none") file = default_cache_file();
    cache = file ? std::make_unique<image::DigestCache>(*file) : std::make_unique<image::DigestCache>();
    builder = std::make_unique<image::ImageBuilder>(*driver, *cache);
  }

  std::unique_ptr<image::BuildDriver> owned;
  image::BuildDriver *driver = nullptr;
  std::unique_ptr<image::DigestCache> cache;
  std::unique_ptr<image::ImageBuilder> builder;
};

int signal_count(const Environment &env) { return env.interrupts ? env.interrupts->load() : 0; }
bool terminating(const Environment &env) { return env.terminate && env.terminate->load(); }

int cmd_run(const std::string &file, const CliConfig &c, std::ostream &out, std::ostream &err,
            const Environment &env) {
  const auto text = read_payload(file);
  const auto cfg = load_cluster(c);
  BuildSetup setup(c, env);
  orchestrator::Orchestrator orch(*setup.builder, deps::DependencyAnalyzer(), c.seed);
  auto handle = orch.start({text, fs::path(file).filename().string()}, cfg, to_options(c));

  const int baseline = signal_count(env);
  while (!handle->wait_for_state(ExecutionState::Done, kSignalPoll)) {
    if (signal_count(env) != baseline || terminating(env)) handle->abort();
  }
  const auto &result = handle->wait();

  if (c.output == OutputFormat::Json) {
    out << result_to_json(result).dump(2) << '\n';
  } else {
    out << result.stdout_text;
    err << result.stderr_text;
    if (result.phase != TerminalPhase::Succeeded && result.phase != TerminalPhase::Failed) {
      err << "q8s: " << orchestrator::to_string(result.phase);
      if (result.failed_state) err << " while " << orchestrator::to_string(*result.failed_state);
      if (!result.diagnostic.empty()) err << ": " << result.diagnostic;
      err << '\n';
    } else if (!result.diagnostic.empty()) {
      err << "q8s: " << result.diagnostic << '\n';
    }
  }
  out.flush();
  return exit_code_for(result);
}

int cmd_dry_run(const std::string &file, const CliConfig &c, std::ostream &out) {
  const auto text = read_payload(file);
  std::string ns(cluster::kDefaultNamespace);
  if (c.kubeconfig_path) ns = cluster::load_kubeconfig(*c.kubeconfig_path).namespace_name;
  if (c.namespace_name) {
    if (!cluster::is_dns_label(*c.namespace_name)) {
      throw UsageError("invalid namespace '" + *c.namespace_name + "'");
    }
    ns = *c.namespace_name;
  }
  // Plans never build; the driver is only needed to construct the orchestrator.
  image::RecordingDriver driver;
  image::DigestCache cache;
  image::ImageBuilder builder(driver, cache);
  orchestrator::Orchestrator orch(builder, deps::DependencyAnalyzer(), c.seed);
  const auto opts = to_options(c);
  orchestrator::validate_options(opts);
  const auto plan = orch.plan({text, fs::path(file).filename().string()}, opts, orch.next_suffix());
  out << plan_to_json(plan, ns).dump(2) << '\n';
  return 0;
}

int cmd_validate_config(const CliConfig &c, std::ostream &out) {
  const auto cfg = load_cluster(c);
  if (c.output == OutputFormat::Json) {
    ordered_json j;
    j["context"] = cfg.context_name;
    j["server"] = cfg.server_url;
    j["namespace"] = cfg.namespace_name;
    j["auth"] = std::holds_alternative<cluster::BearerToken>(cfg.credential) ? "bearer-token"
                                                                             : "client-certificate";
    j["ca_bundle"] = cfg.ca_bundle.has_value();
    j["insecure_skip_tls_verify"] = cfg.insecure_skip_tls_verify;
    out << j.dump(2) << '\n';
  } else {
    out << "ok: " << cluster::describe(cfg) << '\n';
  }
  return 0;
}

fs::path self_binary(const Environment &env) {
  if (!env.self_path.empty()) return fs::absolute(env.self_path);
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  if (ec) throw std::runtime_error("cannot resolve the q8s binary path");
  return p;
}

struct KernelspecFlags {
  std::string prefix;
  std::string dir;
  std::string kubeconfig;
  std::string ns;
  std::string registry;
  std::string base_image;
  std::string build_tool;
};

int cmd_install_kernelspec(const KernelspecFlags &f, std::ostream &out, std::ostream &err,
                           const Environment &env) {
  const std::string name(kernel::kKernelSpecName);
  fs::path dir;
  if (!f.dir.empty()) {
    dir = f.dir;
  } else if (!f.prefix.empty()) {
    dir = fs::path(f.prefix) / "share" / "jupyter" / "kernels" / name;
  } else {
    dir = default_kernelspec_dir(name);
  }

  auto spec = kernel::kernel_spec_json(self_binary(env).string());
  nlohmann::json vars = nlohmann::json::object();
  if (!f.kubeconfig.empty()) vars["KUBECONFIG"] = fs::absolute(f.kubeconfig).string();
  if (!f.ns.empty()) vars["Q8S_NAMESPACE"] = f.ns;
  if (!f.registry.empty()) vars["Q8S_REGISTRY"] = f.registry;
  if (!f.base_image.empty()) vars["Q8S_BASE_IMAGE"] = f.base_image;
  if (!f.build_tool.empty()) vars["Q8S_BUILD_TOOL"] = f.build_tool;
  if (!vars.empty()) spec["env"] = vars;

  const auto file = dir / "kernel.json";
  try {
    fs::create_directories(dir);
    common::write_file_atomic(file, spec.dump(1) + "\n");
  } catch (const std::exception &e) {
    err << "q8s: cannot write kernel spec to " << file.string() << ": " << e.what() << '\n';
    return kExitCantCreate;
  }
  out << "Installed kernelspec " << name << " in " << dir.string() << '\n';
  return 0;
}

int cmd_kernel(const std::string &connection_file, const CliConfig &c, std::ostream &err,
               const Environment &env) {
  auto info = kernel::load_connection_file(connection_file);
  const auto cfg = load_cluster(c);
  const auto opts = to_options(c);
  orchestrator::validate_options(opts);
  BuildSetup setup(c, env);
  orchestrator::Orchestrator orch(*setup.builder, deps::DependencyAnalyzer(), c.seed);

  std::mutex log_mu;
  auto log = [&](std::string_view line) {
    std::lock_guard lock(log_mu);
    err << "q8s kernel: " << line << '\n';
    err.flush();
  };
  kernel::KernelServer server(
      std::move(info), [&](const deps::CellSource &cell) { return orch.start(cell, cfg, opts); },
      log);
  try {
    server.start();
  } catch (const kernel::zmtp::BindFailed &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitInfra;
  }
  log("serving " + cluster::describe(cfg));

  int seen = signal_count(env);
  while (!server.wait_for(kSignalPoll)) {
    if (terminating(env)) break;
    if (const int now = signal_count(env); now != seen) {
      seen = now;
      log("interrupt signal: aborting the cell in flight");
      server.interrupt();
    }
  }
  server.stop();
  return 0;
}

int cmd_fake_cluster(const std::string &scripts_file, const std::string &kubeconfig_out,
                     const std::string &token, const std::string &ns, std::ostream &out,
                     const Environment &env) {
  std::map<std::string, fake::LifecycleScript> scripts;
  if (!scripts_file.empty()) {
    const auto text = read_payload(scripts_file);
    try {
      scripts = fake::parse_scripts(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception &e) {
      throw UsageError(scripts_file + " is not JSON: " + e.what());
    } catch (const std::invalid_argument &e) {
      throw UsageError(scripts_file + ": " + e.what());
    }
  }
  fake::FakeCluster cluster(std::move(scripts), token);
  cluster.start();
  common::write_file_atomic(kubeconfig_out, cluster.kubeconfig_yaml(ns));
  out << "fake cluster listening on " << cluster.url() << '\n';
  out << "kubeconfig written to " << kubeconfig_out << '\n';
  out.flush();

  const int baseline = signal_count(env);
  while (signal_count(env) == baseline && !terminating(env)) std::this_thread::sleep_for(kSignalPoll);
  const auto snap = cluster.snapshot();
  cluster.stop();
  ordered_json summary;
  summary["jobs"] = snap.jobs;
  summary["configmaps"] = snap.configmaps;
  summary["pods"] = snap.pods;
  summary["requests"] = snap.request_log.size();
  out << summary.dump() << '\n';
  return 0;
}

}  // namespace

std::chrono::milliseconds parse_duration(std::string_view text) {
  static const std::regex re(R"(^(\d+(?:\.\d+)?)(ms|s|m|h)?$)");
  std::cmatch m;
  if (!std::regex_match(text.begin(), text.end(), m, re)) {
    throw std::invalid_argument("invalid duration '" + std::string(text) + "'");
  }
  const double value = std::stod(m[1].str());
  const std::string unit = m[2].matched ? m[2].str() : "s";
  const double scale = unit == "ms" ? 1 : unit == "s" ? 1e3 : unit == "m" ? 6e4 : 3.6e6;
  const auto ms = std::chrono::milliseconds(static_cast<long long>(value * scale));
  if (ms <= 0ms) throw std::invalid_argument("duration '" + std::string(text) + "' must be positive");
  return ms;
}

int exit_code_for(const orchestrator::ExecutionResult &result) {
  switch (result.phase) {
    case TerminalPhase::Succeeded:
      return 0;
    case TerminalPhase::Failed: {
      const int code = result.exit_code.value_or(1) & 0xff;
      return code == 0 ? 1 : code;
    }
    case TerminalPhase::TimedOut:
      return kExitTimeout;
    case TerminalPhase::Aborted:
      return kExitAborted;
    case TerminalPhase::InfraError:
      return kExitInfra;
  }
  return kExitInfra;
}

ordered_json result_to_json(const orchestrator::ExecutionResult &r) {
  ordered_json j;
  j["phase"] = orchestrator::to_string(r.phase);
  j["exit_code"] = r.exit_code ? ordered_json(*r.exit_code) : ordered_json(nullptr);
  j["stdout"] = r.stdout_text;
  j["stderr"] = r.stderr_text;
  j["job"] = r.job_name;
  j["configmap"] = r.configmap_name;
  j["image"] = r.image_ref;
  j["failed_state"] =
      r.failed_state ? ordered_json(orchestrator::to_string(*r.failed_state)) : ordered_json(nullptr);
  j["diagnostic"] = r.diagnostic;
  j["status_polls"] = r.status_polls;
  ordered_json timeline = ordered_json::array();
  const auto t0 = r.timeline.empty() ? std::chrono::system_clock::time_point{} : r.timeline.front().at;
  for (const auto &e : r.timeline) {
    timeline.push_back(
        {{"state", orchestrator::to_string(e.state)},
         {"at_ms", std::chrono::duration_cast<std::chrono::milliseconds>(e.at - t0).count()}});
  }
  j["timeline"] = timeline;
  return j;
}

ordered_json plan_to_json(const orchestrator::ExecutionPlan &plan, std::string_view ns) {
  ordered_json j;
  j["namespace"] = ns;
  j["job"] = orchestrator::to_json(plan.job);
  j["configmap"] = orchestrator::to_json(plan.configmap);
  j["image"] = {{"reference", plan.image.image_ref},
                {"base_image", plan.image.base_image},
                {"digest", plan.image.digest},
                {"dockerfile", plan.image.dockerfile_text},
                {"requirements", plan.image.requirements_text}};
  j["dependencies"] = plan.dependencies.packages;
  return j;
}

fs::path default_kernelspec_dir(std::string_view name) {
  fs::path data;
  if (const char *d = std::getenv("JUPYTER_DATA_DIR"); d && *d) {
    data = d;
  } else if (const char *x = std::getenv("XDG_DATA_HOME"); x && *x) {
    data = fs::path(x) / "jupyter";
  } else if (const char *h = std::getenv("HOME"); h && *h) {
    data = fs::path(h) / ".local" / "share" / "jupyter";
  } else {
    throw std::runtime_error("cannot locate a kernel-spec directory: HOME is unset");
  }
  return data / "kernels" / std::string(name);
}

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err,
            const Environment &env) {
  CLI::App app{"Run notebook cells as Kubernetes Jobs on a GPU cluster", "q8s"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kernel::kImplementationVersion));

  Flags flags;
  std::string file;

  auto *run = app.add_subcommand("run", "Execute a Python file as one remote job");
  run->add_option("file", file, "Payload file")->required();
  add_cluster_flags(run, flags);
  add_image_flags(run, flags);
  add_execution_flags(run, flags);
  add_output_flag(run, flags);

  auto *dry = app.add_subcommand("dry-run", "Print the manifests and image spec a run would use");
  dry->add_option("file", file, "Payload file")->required();
  add_cluster_flags(dry, flags);
  add_image_flags(dry, flags);

  auto *check = app.add_subcommand("validate-config", "Parse the kubeconfig and report its target");
  add_cluster_flags(check, flags);
  add_output_flag(check, flags);

  KernelspecFlags ks;
  auto *install = app.add_subcommand("install-kernelspec", "Register the notebook kernel");
  install->add_option("--prefix", ks.prefix, "Install under PREFIX/share/jupyter/kernels");
  install->add_option("--dir", ks.dir, "Exact kernel-spec directory");
  install->add_option("--kubeconfig", ks.kubeconfig, "Kubeconfig recorded in the kernel spec's env");
  install->add_option("--namespace", ks.ns, "Namespace recorded in the kernel spec's env");
  install->add_option("--registry", ks.registry, "Registry recorded in the kernel spec's env");
  install->add_option("--base-image", ks.base_image, "Base image recorded in the kernel spec's env");
  install->add_option("--build-tool", ks.build_tool, "Build tool recorded in the kernel spec's env");

  auto *kern = app.add_subcommand("kernel", "Serve the notebook kernel protocol");
  kern->add_option("-f,--connection-file", file, "Connection file written by the frontend")
      ->required();
  add_cluster_flags(kern, flags);
  add_image_flags(kern, flags);
  add_execution_flags(kern, flags);

  std::string scripts_file, kubeconfig_out, token = "fake-token", fake_ns = "default";
  auto *fake_cmd = app.add_subcommand("fake-cluster", "Serve an in-memory API server until interrupted");
  fake_cmd->add_option("--scripts", scripts_file, "JSON map of job-name patterns to lifecycles");
  fake_cmd->add_option("--kubeconfig-out", kubeconfig_out, "Where to write a kubeconfig for it")
      ->required();
  fake_cmd->add_option("--token", token, "Bearer token the server accepts")->capture_default_str();
  fake_cmd->add_option("--namespace", fake_ns, "Namespace in the written kubeconfig")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion &e) {
    out << e.what() << '\n';
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "q8s: " << e.what() << '\n';
    err << "Run with --help for usage.\n";
    return kExitUsage;
  }

  try {
    if (*install) return cmd_install_kernelspec(ks, out, err, env);
    if (*fake_cmd) return cmd_fake_cluster(scripts_file, kubeconfig_out, token, fake_ns, out, env);
    const auto config = to_config(flags);
    if (*run) return cmd_run(file, config, out, err, env);
    if (*dry) return cmd_dry_run(file, config, out);
    if (*check) return cmd_validate_config(config, out);
    if (*kern) return cmd_kernel(file, config, err, env);
  } catch (const UsageError &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitUsage;
  } catch (const cluster::ConfigError &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitUsage;
  } catch (const kernel::ConnectionError &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitUsage;
  } catch (const image::ImageError &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fake::BindFailed &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitInfra;
  } catch (const std::exception &e) {
    err << "q8s: " << e.what() << '\n';
    return kExitInfra;
  }
  return kExitUsage;
}

}  // namespace q8s::cli
