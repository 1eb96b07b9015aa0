#pragma once

#include "promptband/oracle/oracle.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace promptband {

struct GatewayConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/generate
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{500};
  double backoff_factor = 2.0;
  NormalizationPolicy normalization;
  // {instruction} and {exemplar} are substituted into the prompt text,
  // {input} into the per-instance input text.
  std::string prompt_template = "{instruction}\n\n{exemplar}";
  std::string input_template = "{input}";

  void validate() const;
};

struct LabeledInstance {
  std::string input;
  std::string target;
};

/// Queries a text-generation endpoint over HTTP:
///   POST {"prompt": ..., "input": ...}  ->  200 {"output": ...}
/// Non-200 responses and transport errors are retried with exponential
/// backoff; once retries are exhausted OracleUnavailable is thrown.
class GatewayOracle final : public Oracle {
 public:
  GatewayOracle(GatewayConfig config, std::vector<std::string> instruction_texts,
                std::vector<std::string> exemplar_texts, const PromptSpace& space,
                std::vector<LabeledInstance> instances);

  std::vector<double> evaluate(PromptId prompt, std::span<const int> instances) override;
  std::size_t n_prompts() const override { return prompt_texts_.size(); }
  int n_valid() const override { return static_cast<int>(instances_.size()); }
  bool deterministic() const override { return false; }

  const std::string& prompt_text(PromptId prompt) const;
  long requests_sent() const { return requests_sent_; }

 private:
  // Returns the loss, or nullopt after exhausting retries.
  std::optional<double> query(const std::string& prompt, const LabeledInstance& instance,
                              long& sent) const;

  GatewayConfig config_;
  std::string host_;
  std::string path_;
  std::vector<std::string> prompt_texts_;
  std::vector<LabeledInstance> instances_;
  long requests_sent_ = 0;
};

std::string render_template(std::string text, const std::string& key, const std::string& value);

}  // namespace promptband
