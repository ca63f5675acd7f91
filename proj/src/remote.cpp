#include "crashlens/remote.hpp"

#include <cmath>

#include "httplib.h"
#include "json.hpp"

namespace crashlens::remote {

namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

ParsedUrl parse_http_url(const std::string& url) {
  const std::string prefix = "http://";
  if (url.rfind(prefix, 0) != 0) {
    throw ConfigError("remote endpoint must start with http:// : " + url);
  }
  std::string rest = url.substr(prefix.size());
  ParsedUrl parsed;
  std::size_t slash = rest.find('/');
  std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
  parsed.path = slash == std::string::npos ? "/" : rest.substr(slash);
  std::size_t colon = authority.find(':');
  if (colon == std::string::npos) {
    parsed.host = authority;
  } else {
    parsed.host = authority.substr(0, colon);
    try {
      parsed.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("remote endpoint has an invalid port: " + url);
    }
  }
  if (parsed.host.empty()) {
    throw ConfigError("remote endpoint has an empty host: " + url);
  }
  return parsed;
}

}  // namespace

void RemotePredictorSpec::validate() const {
  if (endpoint.empty()) throw ConfigError("remote endpoint is empty");
  if (!(timeout_seconds > 0.0)) {
    throw ConfigError("remote timeout must be positive");
  }
  if (max_in_flight < 1) {
    throw ConfigError("remote in-flight limit must be at least 1");
  }
  parse_http_url(endpoint);
}

// Counting gate with a runtime-configured limit.
struct RemotePredictor::Gate {
  explicit Gate(int limit) : available(limit) {}
  std::mutex mutex;
  std::condition_variable cv;
  int available;

  void acquire() {
    std::unique_lock lock(mutex);
    cv.wait(lock, [this] { return available > 0; });
    --available;
  }
  void release() {
    {
      std::lock_guard lock(mutex);
      ++available;
    }
    cv.notify_one();
  }
};

RemotePredictor::RemotePredictor(RemotePredictorSpec spec,
                                 labels::SpecialVocab vocab)
    : spec_(std::move(spec)), vocab_(std::move(vocab)) {
  spec_.validate();
  if (vocab_.task != spec_.task) {
    throw ConfigError("remote vocabulary task does not match endpoint task");
  }
  ParsedUrl url = parse_http_url(spec_.endpoint);
  host_ = url.host;
  port_ = url.port;
  path_ = url.path;
  gate_ = std::make_unique<Gate>(spec_.max_in_flight);
}

RemotePredictor::~RemotePredictor() = default;

predictor::ClassDistribution RemotePredictor::predict(
    const predictor::ReducedPrompt& prompt) const {
  json request;
  request["task"] = to_string(prompt.task);
  request["system"] = prompt.system;
  if (prompt.sentence_mode) {
    request["sentences"] = prompt.sentences;
  } else {
    request["parts"] = prompt.parts;
  }
  request["vocabulary"] = vocab_.tokens;
  const std::string body = request.dump();

  gate_->acquire();
  struct Release {
    Gate* gate;
    ~Release() { gate->release(); }
  } release{gate_.get()};

  httplib::Result result;
  std::string transport_failure;
  for (int attempt = 0; attempt <= spec_.retries; ++attempt) {
    httplib::Client client(host_, port_);
    auto seconds = static_cast<time_t>(spec_.timeout_seconds);
    auto micros = static_cast<time_t>(
        (spec_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    result = client.Post(path_, body, "application/json");
    if (result) break;
    transport_failure = httplib::to_string(result.error());
  }
  if (!result) {
    throw TransportError("remote predictor at " + spec_.endpoint +
                         " failed: " + transport_failure);
  }
  if (result->status != 200) {
    throw TransportError("remote predictor at " + spec_.endpoint +
                         " returned HTTP " + std::to_string(result->status));
  }

  json response;
  try {
    response = json::parse(result->body);
  } catch (const json::exception& e) {
    throw ProtocolError("remote predictor returned malformed JSON: " +
                        std::string(e.what()));
  }
  if (!response.is_object() || !response.contains("probs") ||
      !response.at("probs").is_object()) {
    throw ProtocolError("remote predictor response is missing the 'probs' object");
  }

  std::vector<double> probs(static_cast<std::size_t>(vocab_.size()), 0.0);
  double raw_mass = 0.0;
  for (const auto& [token, value] : response.at("probs").items()) {
    if (!value.is_number()) {
      throw ProtocolError("remote probability for token '" + token +
                          "' is not a number");
    }
    double p = value.get<double>();
    if (!std::isfinite(p) || p < 0.0) {
      throw ProtocolError("remote probability for token '" + token +
                          "' is negative or non-finite");
    }
    int index = vocab_.index_of(token);
    if (index < 0) continue;  // tokens outside the task vocabulary are ignored
    probs[static_cast<std::size_t>(index)] = p;
    raw_mass += p;
  }
  if (raw_mass <= 0.0) {
    throw ProtocolError(
        "remote predictor assigned zero probability mass to the task vocabulary");
  }
  return predictor::ClassDistribution::from_probs(spec_.task, std::move(probs),
                                                  raw_mass);
}

}  // namespace crashlens::remote
