#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>

#include "crashlens/labels.hpp"
#include "crashlens/predictor.hpp"

namespace crashlens::remote {

struct RemotePredictorSpec {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/predict
  Task task{};
  double timeout_seconds = 10.0;
  int retries = 0;        // extra attempts after a transport failure
  int max_in_flight = 4;  // per-endpoint concurrency limit

  void validate() const;
};

// POSTs {task, system, parts[] | sentences[], vocabulary[]} and expects
// {probs: {token: number}}. Probabilities are renormalized over the task
// vocabulary; the pre-normalization mass is kept as raw_mass. Timeouts and
// connection failures raise TransportError, contract violations raise
// ProtocolError.
class RemotePredictor final : public predictor::Predictor {
public:
  RemotePredictor(RemotePredictorSpec spec, labels::SpecialVocab vocab);
  ~RemotePredictor() override;

  Task task() const override { return spec_.task; }
  int class_count() const override { return vocab_.size(); }
  predictor::ClassDistribution predict(
      const predictor::ReducedPrompt& prompt) const override;

  const RemotePredictorSpec& spec() const { return spec_; }

private:
  struct Gate;
  RemotePredictorSpec spec_;
  labels::SpecialVocab vocab_;
  std::string host_;
  int port_ = 80;
  std::string path_;
  std::unique_ptr<Gate> gate_;
};

}  // namespace crashlens::remote
