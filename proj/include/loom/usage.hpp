#pragma once

#include <cstdint>

#include "loom/json.hpp"

namespace loom {

// Token, time, and cost accounting for one LLM call (or an aggregate).
struct UsageRecord {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double wall_time = 0.0; // seconds
    double cost_usd = 0.0;
    bool approximate = false; // token counts estimated, not endpoint-reported

    UsageRecord& operator+=(const UsageRecord& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        wall_time += other.wall_time;
        cost_usd += other.cost_usd;
        approximate = approximate || other.approximate;
        return *this;
    }

    std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }

    json to_json() const {
        return json{{"prompt_tokens", prompt_tokens},
                    {"completion_tokens", completion_tokens},
                    {"wall_time", wall_time},
                    {"cost_usd", cost_usd},
                    {"approximate", approximate}};
    }
};

// Per-1K-token prices; kept configurable because cost depends on the
// deployed model's pricing.
struct RateCard {
    double input_per_1k = 0.0;
    double output_per_1k = 0.0;

    double cost(std::int64_t prompt_tokens, std::int64_t completion_tokens) const {
        return (static_cast<double>(prompt_tokens) / 1000.0) * input_per_1k +
               (static_cast<double>(completion_tokens) / 1000.0) * output_per_1k;
    }
};

} // namespace loom
