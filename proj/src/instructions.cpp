#include "msqa/instructions.hpp"

#include <fstream>

#include "msqa/errors.hpp"

namespace msqa {

namespace {
constexpr std::string_view kTagsPlaceholder = "{tags}";
}

std::string render_instruction(std::string_view instruction_template, std::span<const std::string> tags) {
    std::string joined;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (i > 0) joined += ", ";
        joined += tags[i];
    }
    std::string out(instruction_template);
    for (std::size_t pos = out.find(kTagsPlaceholder); pos != std::string::npos; pos = out.find(kTagsPlaceholder, pos + joined.size())) {
        out.replace(pos, kTagsPlaceholder.size(), joined);
    }
    return out;
}

InstructionBuild build_tuples(std::span<const QARecord> train, const InstructionOptions& options) {
    if (options.instruction_template.find(kTagsPlaceholder) == std::string::npos)
        throw ValidationError("instruction template must contain the {tags} placeholder");
    InstructionBuild build;
    build.tuples.reserve(train.size());
    for (const auto& r : train) {
        if (options.exclude_over_length && r.flags.count(RecordFlag::over_length) > 0) {
            build.skipped_ids.push_back(r.id);
            continue;
        }
        InstructionTuple t;
        if (r.tags.empty()) {
            t.instruction = kFallbackInstruction;
            build.fallback_ids.push_back(r.id);
        } else {
            t.instruction = render_instruction(options.instruction_template, r.tags);
        }
        t.input = r.question;
        t.response = r.answer;
        t.source_id = r.id;
        build.tuples.push_back(std::move(t));
    }
    return build;
}

std::string render_prompt(const InstructionTuple& tuple, std::string_view preamble) {
    std::string out;
    if (!preamble.empty()) {
        out.append(preamble);
        out.push_back('\n');
    }
    out += "Instruction: " + tuple.instruction + "\n";
    out += "Input: " + tuple.input + "\n";
    out += "Response: " + tuple.response;
    return out;
}

std::string render_query(std::string_view instruction, std::string_view input, std::string_view preamble) {
    std::string out;
    if (!preamble.empty()) {
        out.append(preamble);
        out.push_back('\n');
    }
    out += "Instruction: ";
    out += instruction;
    out += "\nInput: ";
    out += input;
    out += "\nResponse:";
    return out;
}

nlohmann::json to_json(const InstructionTuple& t) {
    return nlohmann::json{{"instruction", t.instruction}, {"input", t.input}, {"response", t.response}};
}

void save_instructions(const std::filesystem::path& path, std::span<const InstructionTuple> tuples) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    for (const auto& t : tuples) out << to_json(t).dump() << '\n';
}

}  // namespace msqa
