#include "ecotrain/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

namespace {

void ignore_sigpipe_once() {
    static const bool done = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

ExitStatus decode(int raw) {
    ExitStatus s;
    if (WIFEXITED(raw)) {
        s.exited = true;
        s.code = WEXITSTATUS(raw);
    } else if (WIFSIGNALED(raw)) {
        s.signal = WTERMSIG(raw);
    }
    return s;
}

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

std::string ExitStatus::describe() const {
    if (exited) return "exit code " + std::to_string(code);
    return std::string("killed by signal ") + std::to_string(signal) + " (" + ::strsignal(signal) + ")";
}

ChildProcess ChildProcess::spawn(const std::vector<std::string>& argv, const std::filesystem::path& stderr_path) {
    if (argv.empty()) throw Error("cannot launch trainer: empty command");
    ignore_sigpipe_once();

    int in_pipe[2];
    int out_pipe[2];
    int err_pipe[2];  // reports exec failure; closed on successful exec
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) {
        throw Error(std::string("pipe: ") + std::strerror(errno));
    }
    int err_fd = -1;
    if (!stderr_path.empty()) {
        err_fd = ::open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
        if (err_fd < 0) throw Error("cannot open " + stderr_path.string() + ": " + std::strerror(errno));
    }

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
    if (pid > 0) ::setpgid(pid, pid);
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
        ::signal(SIGPIPE, SIG_DFL);
        ::execvp(cargv[0], cargv.data());
        const int e = errno;
        [[maybe_unused]] auto n = ::write(err_pipe[1], &e, sizeof e);
        ::_exit(127);
    }

    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    if (err_fd >= 0) ::close(err_fd);

    int exec_errno = 0;
    ssize_t n;
    do {
        n = ::read(err_pipe[0], &exec_errno, sizeof exec_errno);
    } while (n < 0 && errno == EINTR);
    ::close(err_pipe[0]);
    if (n == static_cast<ssize_t>(sizeof exec_errno)) {
        int raw = 0;
        ::waitpid(pid, &raw, 0);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw Error("cannot launch trainer '" + argv[0] + "': " + std::strerror(exec_errno));
    }

    ChildProcess child;
    child.pid_ = pid;
    child.stdin_fd_ = in_pipe[1];
    child.stdout_fd_ = out_pipe[0];
    return child;
}

ChildProcess::ChildProcess(ChildProcess&& other) noexcept { *this = std::move(other); }

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
    if (this != &other) {
        release();
        pid_ = std::exchange(other.pid_, -1);
        stdin_fd_ = std::exchange(other.stdin_fd_, -1);
        stdout_fd_ = std::exchange(other.stdout_fd_, -1);
        buffer_ = std::move(other.buffer_);
        eof_ = other.eof_;
        status_ = std::exchange(other.status_, std::nullopt);
    }
    return *this;
}

ChildProcess::~ChildProcess() { release(); }

void ChildProcess::release() {
    if (running()) kill_and_wait();
    close_fd(stdin_fd_);
    close_fd(stdout_fd_);
    pid_ = -1;
}

ReadStatus ChildProcess::read_line(std::string& out, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            out.assign(buffer_, 0, nl);
            if (!out.empty() && out.back() == '\r') out.pop_back();
            buffer_.erase(0, nl + 1);
            return ReadStatus::line;
        }
        if (eof_ || stdout_fd_ < 0) {
            if (!buffer_.empty()) {
                out = std::move(buffer_);
                buffer_.clear();
                return ReadStatus::line;
            }
            return ReadStatus::eof;
        }
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() < 0) return ReadStatus::timeout;
        pollfd p{stdout_fd_, POLLIN, 0};
        int r = ::poll(&p, 1, static_cast<int>(left.count()));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw Error(std::string("poll: ") + std::strerror(errno));
        }
        if (r == 0) return ReadStatus::timeout;
        char chunk[4096];
        ssize_t n = ::read(stdout_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw Error(std::string("read: ") + std::strerror(errno));
        }
        if (n == 0) {
            eof_ = true;
        } else {
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }
}

bool ChildProcess::write_line(std::string_view line) {
    if (stdin_fd_ < 0) return false;
    std::string data(line);
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(stdin_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

void ChildProcess::close_stdin() { close_fd(stdin_fd_); }

std::optional<ExitStatus> ChildProcess::try_wait() {
    if (status_ || pid_ <= 0) return status_;
    int raw = 0;
    pid_t r = ::waitpid(pid_, &raw, WNOHANG);
    if (r == pid_) status_ = decode(raw);
    return status_;
}

std::optional<ExitStatus> ChildProcess::wait_for(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (auto s = try_wait()) return s;
        if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
}

ExitStatus ChildProcess::kill_and_wait() {
    if (auto s = try_wait()) return *s;
    ::kill(-pid_, SIGKILL);  // whole process group: trainers may have spawned workers
    ::kill(pid_, SIGKILL);
    int raw = 0;
    while (::waitpid(pid_, &raw, 0) < 0 && errno == EINTR) {
    }
    status_ = decode(raw);
    return *status_;
}

std::optional<std::filesystem::path> find_executable(const std::string& name) {
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string::npos) {
        if (::access(name.c_str(), X_OK) == 0 && !std::filesystem::is_directory(name)) return std::filesystem::path(name);
        return std::nullopt;
    }
    const char* path = std::getenv("PATH");
    for (const auto& dir : split(path ? path : "/usr/bin:/bin", ':')) {
        if (dir.empty()) continue;
        std::filesystem::path candidate = std::filesystem::path(dir) / name;
        if (::access(candidate.c_str(), X_OK) == 0 && !std::filesystem::is_directory(candidate)) return candidate;
    }
    return std::nullopt;
}

}  // namespace ecotrain
