#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <json.hpp>

#include "geosmooth/classifier.hpp"
#include "geosmooth/errors.hpp"

namespace geosmooth {

using json = nlohmann::json;

ExternalClassifier::ExternalClassifier(std::string command, GridGeometry geometry, int num_classes,
                                       std::chrono::milliseconds timeout)
    : command_(std::move(command)), geometry_(geometry), num_classes_(num_classes), timeout_(timeout) {
  if (num_classes_ < 1) throw DomainError("ExternalClassifier: num_classes must be >= 1");
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw BackendError("cannot create pipe: " + std::string(std::strerror(errno)), "");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw BackendError("cannot create pipe: " + std::string(std::strerror(errno)), "");
  }
  const pid_t pid = fork();
  if (pid < 0) throw BackendError("fork failed: " + std::string(std::strerror(errno)), "");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  signal(SIGPIPE, SIG_IGN);
}

ExternalClassifier::~ExternalClassifier() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Give the child a moment to exit on EOF, then make sure it is gone.
    for (int k = 0; k < 50; ++k) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) return;
      usleep(10000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }
}

std::string ExternalClassifier::read_line() const {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw BackendError("external classifier timed out", buffer_);
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BackendError("poll failed: " + std::string(std::strerror(errno)), buffer_);
    }
    if (rc == 0) throw BackendError("external classifier timed out", buffer_);
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError("read failed: " + std::string(std::strerror(errno)), buffer_);
    }
    if (n == 0) throw BackendError("external classifier closed its output", buffer_);
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ExternalClassifier::Reply ExternalClassifier::request(std::span<const Image> batch) const {
  check_batch(batch);
  std::lock_guard lock(mu_);
  const long id = next_id_++;
  json req;
  req["id"] = id;
  req["shape"] = {geometry_.height, geometry_.width, geometry_.channels};
  req["images"] = json::array();
  for (const auto& img : batch) {
    std::vector<double> flat;
    flat.reserve(geometry_.size());
    for (int r = 0; r < geometry_.height; ++r) {
      for (int c = 0; c < geometry_.width; ++c) {
        for (int ch = 0; ch < geometry_.channels; ++ch) flat.push_back(img.at(ch, r, c));
      }
    }
    req["images"].push_back(std::move(flat));
  }
  const std::string line = req.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = write(to_child_, line.data() + sent, line.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError("write to external classifier failed: " + std::string(std::strerror(errno)), "");
    }
    sent += static_cast<std::size_t>(n);
  }

  const std::string raw = read_line();
  json resp;
  try {
    resp = json::parse(raw);
  } catch (const json::parse_error&) {
    throw BackendError("external classifier sent invalid JSON", raw);
  }
  if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer() || resp["id"].get<long>() != id) {
    throw BackendError("external classifier reply has wrong or missing id (expected " + std::to_string(id) + ")", raw);
  }
  if (!resp.contains("labels") || !resp["labels"].is_array() || resp["labels"].size() != batch.size()) {
    throw BackendError("external classifier reply must carry " + std::to_string(batch.size()) + " labels", raw);
  }
  Reply out;
  for (const auto& l : resp["labels"]) {
    if (!l.is_number_integer() || l.get<int>() < 0 || l.get<int>() >= num_classes_) {
      throw BackendError("external classifier returned an invalid label", raw);
    }
    out.labels.push_back(l.get<int>());
  }
  if (resp.contains("scores")) {
    const json& s = resp["scores"];
    if (!s.is_array() || s.size() != batch.size()) throw BackendError("malformed scores field", raw);
    for (const auto& row : s) {
      if (!row.is_array() || static_cast<int>(row.size()) != num_classes_) {
        throw BackendError("malformed scores field", raw);
      }
      std::vector<double> v;
      for (const auto& x : row) {
        if (!x.is_number()) throw BackendError("malformed scores field", raw);
        v.push_back(x.get<double>());
      }
      out.scores.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<int> ExternalClassifier::classify_batch(std::span<const Image> batch) const {
  if (batch.empty()) return {};
  return request(batch).labels;
}

std::vector<std::vector<double>> ExternalClassifier::scores_batch(std::span<const Image> batch) const {
  if (batch.empty()) return {};
  Reply r = request(batch);
  if (r.scores.empty()) {
    scores_supported_ = false;
    throw std::logic_error("external classifier does not provide scores");
  }
  return std::move(r.scores);
}

}  // namespace geosmooth
