#include "promptband/oracle/gateway.hpp"

#include <httplib.h>
#include <json.hpp>

#include <future>
#include <thread>

namespace promptband {

namespace {

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("gateway endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::string render_template(std::string text, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto pos = text.find(token); pos != std::string::npos;
       pos = text.find(token, pos + value.size())) {
    text.replace(pos, token.size(), value);
  }
  return text;
}

void GatewayConfig::validate() const {
  if (endpoint.empty()) throw ValidationError("gateway endpoint is empty");
  if (timeout.count() <= 0) throw ValidationError("gateway timeout must be positive");
  if (max_retries < 0) throw ValidationError("gateway max_retries must be >= 0");
  if (max_in_flight < 1) throw ValidationError("gateway max_in_flight must be >= 1");
  if (backoff_base.count() < 0 || backoff_factor < 1.0) {
    throw ValidationError("gateway backoff must be non-negative with factor >= 1");
  }
}

GatewayOracle::GatewayOracle(GatewayConfig config, std::vector<std::string> instruction_texts,
                             std::vector<std::string> exemplar_texts, const PromptSpace& space,
                             std::vector<LabeledInstance> instances)
    : config_(std::move(config)), instances_(std::move(instances)) {
  config_.validate();
  std::tie(host_, path_) = split_endpoint(config_.endpoint);
  if (instruction_texts.size() != space.instructions().size() ||
      exemplar_texts.size() != space.exemplars().size()) {
    throw DimensionError("gateway texts do not match the prompt space");
  }
  prompt_texts_.reserve(space.size());
  for (const auto& p : space.prompts()) {
    std::string text = render_template(config_.prompt_template, "instruction",
                                       instruction_texts[static_cast<std::size_t>(p.instruction_index)]);
    prompt_texts_.push_back(render_template(
        std::move(text), "exemplar", exemplar_texts[static_cast<std::size_t>(p.exemplar_index)]));
  }
}

const std::string& GatewayOracle::prompt_text(PromptId prompt) const {
  if (prompt < 0 || static_cast<std::size_t>(prompt) >= prompt_texts_.size()) {
    throw RangeError("prompt " + std::to_string(prompt) + " out of range");
  }
  return prompt_texts_[static_cast<std::size_t>(prompt)];
}

std::optional<double> GatewayOracle::query(const std::string& prompt,
                                           const LabeledInstance& instance, long& sent) const {
  httplib::Client client(host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const std::string body =
      nlohmann::json{{"prompt", prompt},
                     {"input", render_template(config_.input_template, "input", instance.input)}}
          .dump();
  auto delay = std::chrono::duration<double, std::milli>(config_.backoff_base);
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= config_.backoff_factor;
    }
    ++sent;
    auto res = client.Post(path_, body, "application/json");
    if (!res || res->status != 200) continue;
    try {
      auto j = nlohmann::json::parse(res->body);
      return exact_match_loss(instance.target, j.at("output").get<std::string>(),
                              config_.normalization);
    } catch (const nlohmann::json::exception&) {
      continue;  // malformed body counts as a failed attempt
    }
  }
  return std::nullopt;
}

std::vector<double> GatewayOracle::evaluate(PromptId prompt, std::span<const int> instances) {
  const std::string& text = prompt_text(prompt);
  for (int i : instances) {
    if (i < 0 || i >= n_valid()) throw RangeError("validation instance " + std::to_string(i) + " out of range");
  }
  std::vector<double> losses(instances.size());
  std::map<int, double> partial;
  bool failed = false;
  const std::size_t wave = static_cast<std::size_t>(config_.max_in_flight);
  for (std::size_t start = 0; start < instances.size() && !failed; start += wave) {
    const std::size_t stop = std::min(instances.size(), start + wave);
    std::vector<std::future<std::pair<std::optional<double>, long>>> inflight;
    for (std::size_t k = start; k < stop; ++k) {
      const auto& inst = instances_[static_cast<std::size_t>(instances[k])];
      inflight.push_back(std::async(std::launch::async, [this, &text, &inst] {
        long sent = 0;
        auto loss = query(text, inst, sent);
        return std::make_pair(loss, sent);
      }));
    }
    for (std::size_t k = start; k < stop; ++k) {
      auto [loss, sent] = inflight[k - start].get();
      requests_sent_ += sent;
      if (loss) {
        losses[k] = *loss;
        partial[instances[k]] = *loss;
      } else {
        failed = true;
      }
    }
  }
  if (failed) {
    throw OracleUnavailable("gateway " + config_.endpoint + " unavailable after " +
                                std::to_string(config_.max_retries) + " retries",
                            prompt, std::move(partial));
  }
  return losses;
}

}  // namespace promptband
