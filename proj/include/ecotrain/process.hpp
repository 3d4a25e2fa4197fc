#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecotrain {

struct ExitStatus {
    bool exited = false;  // normal exit, `code` valid
    int code = 0;
    int signal = 0;       // terminating signal when !exited

    bool success() const { return exited && code == 0; }
    std::string describe() const;
};

enum class ReadStatus { line, timeout, eof };

/// A child process with pipes on stdin and stdout. stderr goes to a file
/// (or is inherited when no path is given).
class ChildProcess {
public:
    static ChildProcess spawn(const std::vector<std::string>& argv, const std::filesystem::path& stderr_path = {});

    ChildProcess(ChildProcess&& other) noexcept;
    ChildProcess& operator=(ChildProcess&& other) noexcept;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;
    ~ChildProcess();

    /// Reads one newline-terminated line from the child's stdout, waiting at
    /// most `timeout`. A trailing unterminated fragment at EOF is returned as
    /// a line.
    ReadStatus read_line(std::string& out, std::chrono::milliseconds timeout);

    /// Writes `line` plus a newline to the child's stdin. Returns false if the
    /// child has closed its end.
    bool write_line(std::string_view line);
    void close_stdin();

    std::optional<ExitStatus> try_wait();
    std::optional<ExitStatus> wait_for(std::chrono::milliseconds timeout);
    ExitStatus kill_and_wait();

    pid_t pid() const { return pid_; }
    bool running() const { return pid_ > 0 && !status_; }

private:
    ChildProcess() = default;
    void release();

    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    bool eof_ = false;
    std::optional<ExitStatus> status_;
};

/// Resolves argv[0] through PATH the way execvp would; nullopt if nothing
/// executable is found.
std::optional<std::filesystem::path> find_executable(const std::string& name);

}  // namespace ecotrain
