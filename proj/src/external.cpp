#include "med/external.hpp"

#include <atomic>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

extern char** environ;

namespace med {

namespace {

struct ChildFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string describe_point(std::span<const double> x) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << ']';
    return os.str();
}

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

class ExternalDensity::Worker {
public:
    Worker(const std::string& command, std::size_t dim) : command_(command), dim_(dim) {}
    ~Worker() { stop(); }

    bool running() const { return pid_ > 0; }
    std::size_t spawns() const { return spawns_; }

    void start() {
        int in_pipe[2];
        int out_pipe[2];
        if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0)
            throw ProtocolError(std::string("external density: pipe failed: ") +
                                std::strerror(errno));

        std::vector<std::string> env_store;
        for (char** e = environ; *e; ++e)
            if (std::strncmp(*e, "MED_DENSITY_DIM=", 16) != 0) env_store.emplace_back(*e);
        env_store.push_back("MED_DENSITY_DIM=" + std::to_string(dim_));
        std::vector<char*> envp;
        for (auto& s : env_store) envp.push_back(s.data());
        envp.push_back(nullptr);

        pid_t pid = fork();
        if (pid < 0) throw ProtocolError("external density: fork failed");
        if (pid == 0) {
            setpgid(0, 0);
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            const char* argv[] = {"sh", "-c", command_.c_str(), nullptr};
            execve("/bin/sh", const_cast<char* const*>(argv), envp.data());
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        pid_ = pid;
        to_child_ = in_pipe[1];
        from_child_ = out_pipe[0];
        buffer_.clear();
        ++spawns_;
    }

    void stop() {
        if (to_child_ >= 0) close(to_child_);
        if (from_child_ >= 0) close(from_child_);
        to_child_ = from_child_ = -1;
        if (pid_ > 0) {
            kill(-pid_, SIGKILL);
            kill(pid_, SIGKILL);
            int status = 0;
            waitpid(pid_, &status, 0);
        }
        pid_ = -1;
    }

    void send(const std::string& line) {
        std::size_t off = 0;
        while (off < line.size()) {
            ssize_t w = write(to_child_, line.data() + off, line.size() - off);
            if (w < 0) {
                if (errno == EINTR) continue;
                throw ChildFailure("child closed its input");
            }
            off += static_cast<std::size_t>(w);
        }
    }

    std::string receive(std::chrono::milliseconds timeout) {
        auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw ChildFailure("timed out waiting for a response");
            pollfd pfd{from_child_, POLLIN, 0};
            int rc = poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw ChildFailure("poll failed");
            }
            if (rc == 0) throw ChildFailure("timed out waiting for a response");
            char chunk[4096];
            ssize_t r = read(from_child_, chunk, sizeof chunk);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw ChildFailure("read failed");
            }
            if (r == 0) throw ChildFailure("child exited");
            buffer_.append(chunk, static_cast<std::size_t>(r));
        }
    }

private:
    std::string command_;
    std::size_t dim_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::size_t spawns_ = 0;
};

ExternalDensity::ExternalDensity(ExternalOptions opts)
    : DensityModel("external", opts.box.empty() ? unit_box(opts.dim) : opts.box),
      opts_(std::move(opts)) {
    if (opts_.command.empty()) throw std::invalid_argument("external density: empty command");
    if (opts_.dim < 1) throw std::invalid_argument("external density: dimension must be >= 1");
    if (!opts_.box.empty() && opts_.box.size() != opts_.dim)
        throw std::invalid_argument("external density: box dimension mismatch");
    if (opts_.max_concurrency < 1) opts_.max_concurrency = 1;
    ignore_sigpipe();
    for (std::size_t i = 0; i < opts_.max_concurrency; ++i)
        workers_.push_back(std::make_unique<Worker>(opts_.command, opts_.dim));
}

ExternalDensity::~ExternalDensity() = default;

std::size_t ExternalDensity::spawn_count() const {
    std::size_t s = 0;
    for (const auto& w : workers_) s += w->spawns();
    return s;
}

double ExternalDensity::request(Worker& w, std::span<const double> x) {
    std::uint64_t id;
    {
        static std::mutex id_mutex;
        std::lock_guard lock(id_mutex);
        id = next_id_++;
    }
    nlohmann::json req;
    req["id"] = id;
    req["x"] = std::vector<double>(x.begin(), x.end());
    const std::string line = req.dump() + "\n";

    std::string reply;
    for (int attempt = 0;; ++attempt) {
        try {
            if (!w.running()) w.start();
            w.send(line);
            reply = w.receive(opts_.timeout);
            break;
        } catch (const ChildFailure& e) {
            w.stop();
            if (attempt >= 1)
                throw ProtocolError(std::string("external density: ") + e.what() +
                                    " (after one restart) at point " + describe_point(x));
        }
    }

    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError("external density: malformed response '" + reply + "' at point " +
                            describe_point(x));
    }
    if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer() ||
        resp["id"].get<std::uint64_t>() != id)
        throw ProtocolError("external density: response id mismatch at point " +
                            describe_point(x));
    if (!resp.contains("logf") || !resp["logf"].is_number())
        throw ProtocolError("external density: non-numeric logf '" + reply + "' at point " +
                            describe_point(x));
    double v = resp["logf"].get<double>();
    if (std::isnan(v))
        throw ProtocolError("external density: NaN logf at point " + describe_point(x));
    return v;
}

double ExternalDensity::log_density_unit(std::span<const double> unit) {
    if (unit.size() != dim()) throw std::invalid_argument("external density: dimension mismatch");
    return request(*workers_.front(), unit);
}

void ExternalDensity::evaluate_batch(const PointSet& xs, const BatchCallback& done) {
    const std::size_t nw = std::min(workers_.size(), std::max<std::size_t>(xs.size(), 1));
    if (nw <= 1) {
        DensityModel::evaluate_batch(xs, done);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < nw; ++t) {
        threads.emplace_back([&, t] {
            for (;;) {
                if (failed.load()) return;
                std::size_t i = next.fetch_add(1);
                if (i >= xs.size()) return;
                try {
                    auto t0 = std::chrono::steady_clock::now();
                    double v = request(*workers_[t], xs[i]);
                    double ms = std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
                    done(i, v, ms);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::unique_ptr<ExternalDensity> make_external(ExternalOptions opts) {
    return std::make_unique<ExternalDensity>(std::move(opts));
}

}  // namespace med
