#include "ebs/wire.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "json.hpp"

namespace ebs {

std::string encode_request(const MaskedSequence& seq) {
  nlohmann::json j;
  j["type"] = "predict";
  std::vector<int> tokens = seq.tokens();
  for (int& t : tokens)
    if (t == seq.vocabulary().mask_id()) t = -1;
  j["tokens"] = std::move(tokens);
  j["masked"] = seq.masked_indices();
  j["K"] = seq.vocabulary().size();
  return j.dump() + "\n";
}

PredictionSet decode_response(const std::string& line, const MaskedSequence& seq) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw ProtocolViolation(std::string("malformed frame: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw ProtocolViolation("response is missing a string \"type\" field");
  const std::string type = j.at("type").get<std::string>();
  if (type == "error") {
    const std::string message =
        j.contains("message") && j.at("message").is_string()
            ? j.at("message").get<std::string>()
            : "(no message)";
    throw ProtocolViolation("predictor error: " + message);
  }
  if (type != "probs")
    throw ProtocolViolation("unexpected response type: " + type);
  if (!j.contains("probs") || !j.at("probs").is_object())
    throw ProtocolViolation("response is missing the \"probs\" object");

  const std::vector<int> masked = seq.masked_indices();
  const int K = seq.vocabulary().size();
  const auto& probs = j.at("probs");
  if (probs.size() != masked.size())
    throw ProtocolViolation("response covers " + std::to_string(probs.size()) +
                            " indices, expected " + std::to_string(masked.size()));

  PredictionSet preds;
  for (int l : masked) {
    const std::string key = std::to_string(l);
    if (!probs.contains(key))
      throw ProtocolViolation("response missing masked index " + key);
    const auto& row = probs.at(key);
    if (!row.is_array() || static_cast<int>(row.size()) != K)
      throw ProtocolViolation("probability row for index " + key +
                              " must have length " + std::to_string(K));
    std::vector<double> values;
    values.reserve(row.size());
    double sum = 0.0;
    for (const auto& v : row) {
      if (!v.is_number())
        throw ProtocolViolation("non-numeric probability for index " + key);
      const double x = v.get<double>();
      if (!(x >= 0.0))
        throw ProtocolViolation("negative probability for index " + key);
      values.push_back(x);
      sum += x;
    }
    if (std::abs(sum - 1.0) > Categorical::kNormalizationTolerance)
      throw ProtocolViolation("probability row for index " + key +
                              " sums to " + std::to_string(sum));
    preds.insert(l, Categorical(std::move(values)));
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Subprocess transport.

struct ExternalPredictor::Process {
  pid_t pid = -1;
  int to_child = -1;    // write end of child's stdin
  int from_child = -1;  // read end of child's stdout
  std::string buffer;   // bytes read past the last newline

  ~Process() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    if (pid > 0) {
      ::kill(pid, SIGTERM);
      int status = 0;
      ::waitpid(pid, &status, 0);
    }
  }
};

namespace {

[[noreturn]] void child_exec(const std::vector<std::string>& command,
                             int in_fd, int out_fd) {
  ::dup2(in_fd, STDIN_FILENO);
  ::dup2(out_fd, STDOUT_FILENO);
  ::close(in_fd);
  ::close(out_fd);
  std::vector<char*> argv;
  argv.reserve(command.size() + 1);
  for (const std::string& a : command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  ::execvp(argv[0], argv.data());
  ::_exit(127);
}

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolViolation(std::string("write to predictor failed: ") +
                              std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string read_line(int fd, std::string& buffer, int timeout_ms) {
  while (true) {
    const std::size_t nl = buffer.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return line;
    }
    struct pollfd pfd {fd, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, timeout_ms);
    if (pr == 0)
      throw ProtocolViolation("predictor response timed out");
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw ProtocolViolation(std::string("poll failed: ") + std::strerror(errno));
    }
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolViolation(std::string("read from predictor failed: ") +
                              std::strerror(errno));
    }
    if (n == 0)
      throw ProtocolViolation("predictor closed its output stream");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

ExternalPredictor::ExternalPredictor(ExternalPredictorConfig config)
    : config_(std::move(config)), process_(std::make_unique<Process>()) {
  if (config_.command.empty())
    throw ConfigError("ExternalPredictor: empty command");
  if (config_.timeout_ms <= 0)
    throw ConfigError("ExternalPredictor: timeout must be positive");

  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
    throw Error("ExternalPredictor: pipe() failed");

  const pid_t pid = ::fork();
  if (pid < 0) throw Error("ExternalPredictor: fork() failed");
  if (pid == 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    child_exec(config_.command, in_pipe[0], out_pipe[1]);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  process_->pid = pid;
  process_->to_child = in_pipe[1];
  process_->from_child = out_pipe[0];
}

ExternalPredictor::~ExternalPredictor() = default;

PredictionSet ExternalPredictor::predict(const MaskedSequence& seq) const {
  if (config_.vocab_size != 0 && seq.vocabulary().size() != config_.vocab_size)
    throw ProtocolViolation("sequence vocabulary size " +
                            std::to_string(seq.vocabulary().size()) +
                            " does not match configured " +
                            std::to_string(config_.vocab_size));
  write_all(process_->to_child, encode_request(seq));
  const std::string line =
      read_line(process_->from_child, process_->buffer, config_.timeout_ms);
  return decode_response(line, seq);
}

}  // namespace ebs
