#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "msqa/dataset.hpp"

namespace msqa {

/// One expert-tuning example: instruction prompt, input query, response.
struct InstructionTuple {
    std::string instruction;
    std::string input;
    std::string response;
    std::string source_id;

    bool operator==(const InstructionTuple&) const = default;
};

inline const std::string kDefaultInstructionTemplate = "Please answer the following questions concerning {tags}.";
inline const std::string kFallbackInstruction = "Please answer the following question.";
inline const std::string kDefaultPreamble =
    "Below is an instruction that describes a task. Write a response that appropriately completes the request";

struct InstructionBuild {
    std::vector<InstructionTuple> tuples;
    std::vector<std::string> fallback_ids;  // records without tags
    std::vector<std::string> skipped_ids;   // over-length records excluded by option
};

struct InstructionOptions {
    std::string instruction_template = kDefaultInstructionTemplate;
    bool exclude_over_length = false;
};

/// "{tags}" in the template is replaced by the record's tags joined with ", ".
std::string render_instruction(std::string_view instruction_template, std::span<const std::string> tags);

/// One tuple per training record. Throws ValidationError if the template
/// lacks the {tags} placeholder.
InstructionBuild build_tuples(std::span<const QARecord> train, const InstructionOptions& options = {});

/// Preamble line (omitted when empty) followed by the Instruction, Input and
/// Response sections, one per line.
std::string render_prompt(const InstructionTuple& tuple, std::string_view preamble = kDefaultPreamble);

/// The same layout with an empty Response section, used to query the expert.
std::string render_query(std::string_view instruction, std::string_view input, std::string_view preamble = kDefaultPreamble);

void save_instructions(const std::filesystem::path& path, std::span<const InstructionTuple> tuples);
nlohmann::json to_json(const InstructionTuple& tuple);

}  // namespace msqa
