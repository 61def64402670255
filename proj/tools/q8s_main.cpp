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

#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "q8s/cli/cli.hpp"

namespace {

std::atomic<int> g_interrupts{0};
std::atomic<bool> g_terminate{false};

extern "C" void on_signal(int sig) {
  if (sig == SIGINT) {
    g_interrupts.fetch_add(1);
  } else {
    g_terminate.store(true);
  }
}

}  // namespace

int main(int argc, char **argv) {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
  sigaction(SIGHUP, &sa, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  q8s::cli::Environment env;
  env.interrupts = &g_interrupts;
  env.terminate = &g_terminate;
  const std::vector<std::string> args(argv + 1, argv + argc);
  return q8s::cli::run_cli(args, std::cout, std::cerr, env);
}
