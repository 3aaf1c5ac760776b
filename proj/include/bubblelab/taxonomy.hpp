#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bubblelab {

// One of the twenty behavioral mechanisms scored by the reasoning audit.
struct Mechanism {
    std::string id;
    std::string category;
    std::string display_name;
    std::vector<std::string> labels;
    std::string score_rubric;
    std::string definition;
};

// The twenty mechanisms in audit-prompt order.
std::span<const Mechanism> mechanism_taxonomy();
const Mechanism* find_mechanism(std::string_view id);
// The eight category ids, in prompt order.
std::span<const std::string> mechanism_categories();

enum class ShockDirection { Amplify, Suppress };

const char* to_string(ShockDirection d);
std::optional<ShockDirection> parse_shock_direction(std::string_view text);

// Market-wide instruction appended to every model-backed agent's system prompt.
struct ShockSpec {
    std::string mechanism_id;
    ShockDirection direction = ShockDirection::Amplify;
    std::string clause;

    bool operator==(const ShockSpec&) const = default;
};

}  // namespace bubblelab
