#include "spanfuse/core.hpp"

#include "spanfuse/errors.hpp"

namespace spanfuse {

const char* to_string(AnswerType t) { return t == AnswerType::kLong ? "long" : "short"; }

AnswerType answer_type_from_string(const std::string& name) {
    if (name == "long") return AnswerType::kLong;
    if (name == "short") return AnswerType::kShort;
    throw ConfigError("unknown answer type '" + name + "' (expected 'long' or 'short')");
}

const Candidate* best_candidate(const std::vector<Candidate>& candidates) {
    const Candidate* best = nullptr;
    for (const Candidate& c : candidates) {
        if (best == nullptr || ranks_before(c, *best)) best = &c;
    }
    return best;
}

}  // namespace spanfuse
