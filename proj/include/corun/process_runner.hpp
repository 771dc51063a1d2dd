/*
 * Copyright (c) The corun-affinity Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "corun/harness.hpp"

extern char** environ;

namespace corun {

/// POSIX implementation of the synchronized group runner.
///
/// Per slot: fork a child that blocks reading a release pipe, then execs the
/// command. The parent forks the whole group, arms one waiter thread per
/// child, and only then writes the release bytes back to back, recording the
/// release instant per child. Duration is barrier release -> exit as seen by
/// the waiter, so exec overhead is inside the measured window for baselines
/// and co-runs alike and cancels out of the loss ratio.
class RealProcessRunner final : public ProcessRunner {
 public:
  RealProcessRunner() : epoch_(std::chrono::steady_clock::now()) {
    // A child that dies before its release byte is consumed would otherwise
    // kill the harness with SIGPIPE.
    previous_sigpipe_ = std::signal(SIGPIPE, SIG_IGN);
  }

  ~RealProcessRunner() override { std::signal(SIGPIPE, previous_sigpipe_); }

  RealProcessRunner(const RealProcessRunner&) = delete;
  RealProcessRunner& operator=(const RealProcessRunner&) = delete;

  std::vector<LaunchOutcome> run_group(const std::vector<const WorkloadSpec*>& group) override {
    const std::size_t n = group.size();
    std::vector<Child> children(n);
    std::vector<LaunchOutcome> outcomes(n);

    for (std::size_t i = 0; i < n; ++i) {
      if (!spawn_held(*group[i], children[i], outcomes[i])) {
        // Spawn failed outright; kill the held siblings without releasing them.
        for (std::size_t j = 0; j < i; ++j) {
          abort_child(children[j]);
          outcomes[j].launched = false;
          outcomes[j].failure_reason = "aborted after sibling launch failure";
        }
        return outcomes;
      }
    }

    // One waiter per child so each exit is timestamped the moment it happens,
    // not when a sequential waitpid loop gets around to it.
    std::vector<std::thread> waiters;
    waiters.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      waiters.emplace_back([this, &children, i] { wait_child(children[i]); });
    }

    // Release everyone back to back; the write timestamps are the co-start
    // instants the skew bound is checked against.
    for (std::size_t i = 0; i < n; ++i) {
      outcomes[i].released_at_s = mono_now();
      outcomes[i].wall_unix_s = wall_now();
      release(children[i]);
    }
    for (auto& w : waiters) w.join();

    for (std::size_t i = 0; i < n; ++i) {
      finish_outcome(children[i], outcomes[i]);
    }
    return outcomes;
  }

 private:
  struct Child {
    pid_t pid = -1;
    int release_fd = -1;   // write end; child blocks reading the other end
    int execfail_fd = -1;  // read end; CLOEXEC write end delivers errno on exec failure
    int status = 0;
    double exited_at_s = 0.0;
    bool reaped = false;
  };

  double mono_now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
  }

  static double wall_now() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  bool spawn_held(const WorkloadSpec& spec, Child& child, LaunchOutcome& out) {
    int release_pipe[2];
    int execfail_pipe[2];
    if (pipe(release_pipe) != 0) {
      out.launched = false;
      out.failure_reason = std::string("pipe: ") + std::strerror(errno);
      return false;
    }
    if (pipe(execfail_pipe) != 0) {
      out.launched = false;
      out.failure_reason = std::string("pipe: ") + std::strerror(errno);
      close(release_pipe[0]);
      close(release_pipe[1]);
      return false;
    }
    fcntl(execfail_pipe[1], F_SETFD, FD_CLOEXEC);

    // argv/envp must be materialized before fork: only async-signal-safe
    // calls are allowed in the child.
    std::vector<std::string> env_storage;
    std::vector<char*> argv = build_argv(spec);
    std::vector<char*> envp = build_envp(spec, env_storage);
    const char* dir = spec.working_dir ? spec.working_dir->c_str() : nullptr;

    const pid_t pid = fork();
    if (pid < 0) {
      out.launched = false;
      out.failure_reason = std::string("fork: ") + std::strerror(errno);
      close(release_pipe[0]);
      close(release_pipe[1]);
      close(execfail_pipe[0]);
      close(execfail_pipe[1]);
      return false;
    }
    if (pid == 0) {
      // Child. Quiet stdio, move to the working dir, hold at the barrier,
      // then exec. Any failure is reported through the CLOEXEC pipe.
      close(release_pipe[1]);
      close(execfail_pipe[0]);
      const int devnull = open("/dev/null", O_RDWR);
      if (devnull >= 0) {
        dup2(devnull, STDIN_FILENO);
        dup2(devnull, STDOUT_FILENO);
        dup2(devnull, STDERR_FILENO);
        if (devnull > STDERR_FILENO) close(devnull);
      }
      if (dir && chdir(dir) != 0) {
        report_child_error(execfail_pipe[1], errno);
        _exit(127);
      }
      char go;
      while (read(release_pipe[0], &go, 1) < 0 && errno == EINTR) {
      }
      close(release_pipe[0]);
      execvpe(argv[0], argv.data(), envp.data());
      report_child_error(execfail_pipe[1], errno);
      _exit(127);
    }

    // Parent.
    close(release_pipe[0]);
    close(execfail_pipe[1]);
    child.pid = pid;
    child.release_fd = release_pipe[1];
    child.execfail_fd = execfail_pipe[0];
    return true;
  }

  void release(Child& child) {
    if (child.release_fd < 0) return;
    char go = 'g';
    ssize_t rc;
    do {
      rc = write(child.release_fd, &go, 1);
    } while (rc < 0 && errno == EINTR);
    close(child.release_fd);
    child.release_fd = -1;
  }

  void wait_child(Child& child) {
    int status = 0;
    pid_t rc;
    do {
      rc = waitpid(child.pid, &status, 0);
    } while (rc < 0 && errno == EINTR);
    child.exited_at_s = mono_now();
    child.status = status;
    child.reaped = rc == child.pid;
  }

  void abort_child(Child& child) {
    // Kill before touching the release pipe: closing it unblocks the child
    // straight into exec, which must not happen for an aborted round.
    if (child.pid > 0 && !child.reaped) kill(child.pid, SIGKILL);
    if (child.release_fd >= 0) {
      close(child.release_fd);
      child.release_fd = -1;
    }
    if (child.pid > 0 && !child.reaped) wait_child(child);
    if (child.execfail_fd >= 0) {
      close(child.execfail_fd);
      child.execfail_fd = -1;
    }
  }

  void finish_outcome(Child& child, LaunchOutcome& out) {
    out.duration_s = child.exited_at_s - out.released_at_s;
    int child_errno = 0;
    ssize_t got;
    do {
      got = read(child.execfail_fd, &child_errno, sizeof(child_errno));
    } while (got < 0 && errno == EINTR);
    close(child.execfail_fd);
    child.execfail_fd = -1;
    if (got == static_cast<ssize_t>(sizeof(child_errno))) {
      out.launched = false;
      out.failure_reason = std::string("exec: ") + std::strerror(child_errno);
      return;
    }
    if (WIFEXITED(child.status)) {
      out.exit_code = WEXITSTATUS(child.status);
      out.exit_ok = out.exit_code == 0;
    } else if (WIFSIGNALED(child.status)) {
      out.exit_code = -WTERMSIG(child.status);
      out.exit_ok = false;
    }
  }

  static void report_child_error(int fd, int err) {
    ssize_t rc;
    do {
      rc = write(fd, &err, sizeof(err));
    } while (rc < 0 && errno == EINTR);
  }

  static std::vector<char*> build_argv(const WorkloadSpec& spec) {
    std::vector<char*> argv;
    argv.reserve(spec.command.size() + 1);
    for (const auto& arg : spec.command) argv.push_back(const_cast<char*>(arg.c_str()));
    argv.push_back(nullptr);
    return argv;
  }

  static std::vector<char*> build_envp(const WorkloadSpec& spec,
                                       std::vector<std::string>& storage) {
    std::vector<char*> envp;
    for (char** e = environ; *e; ++e) {
      const char* eq = std::strchr(*e, '=');
      if (eq && spec.env_vars.count(std::string(*e, static_cast<std::size_t>(eq - *e)))) {
        continue;  // overridden below
      }
      envp.push_back(*e);
    }
    storage.reserve(spec.env_vars.size());
    for (const auto& [k, v] : spec.env_vars) {
      storage.push_back(k + "=" + v);
      envp.push_back(storage.back().data());
    }
    envp.push_back(nullptr);
    return envp;
  }

  std::chrono::steady_clock::time_point epoch_;
  void (*previous_sigpipe_)(int) = SIG_DFL;
};

}  // namespace corun
