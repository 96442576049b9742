#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace fedsim {

/// A spawned child process; killed and reaped on destruction if still
/// running.
class ChildProcess {
 public:
  /// argv[0] is the executable path. Throws kSpawnError.
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();
  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&&) = delete;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  pid_t pid() const noexcept { return pid_; }
  /// Raw wait status, or nullopt if the child is still running at timeout.
  std::optional<int> wait(std::chrono::milliseconds timeout);
  void kill();

 private:
  pid_t pid_ = -1;
  std::optional<int> status_;
};

}  // namespace fedsim
