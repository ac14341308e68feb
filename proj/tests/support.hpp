#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "leakscope/core.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("leakscope-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline leakscope::JudgmentRecord make_judgment(std::string prompt, std::string judge,
                                               std::string a, std::string b, int order,
                                               leakscope::verdict v) {
  leakscope::JudgmentRecord rec;
  rec.prompt_id = std::move(prompt);
  rec.judge = std::move(judge);
  rec.model_a = std::move(a);
  rec.model_b = std::move(b);
  rec.order_index = order;
  rec.result = v;
  return rec;
}

inline std::string qid(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "q%04d", i);
  return buf;
}

// Judgment set reproducing the worked example's win rates over 1000
// questions: 55.1% / 44.9% under the first judge, 36.8% / 63.2% under the
// second, single presentation order, no ties.
inline std::vector<leakscope::JudgmentRecord> worked_example_judgments(
    const std::string& student_i = "mistral-gpt4o",
    const std::string& student_j = "mistral-gemini",
    const std::string& judge_i = "gpt-4o", const std::string& judge_j = "gemini-1.5") {
  using leakscope::verdict;
  std::vector<leakscope::JudgmentRecord> out;
  for (int i = 0; i < 1000; ++i) {
    out.push_back(make_judgment(qid(i), judge_i, student_i, student_j, 0,
                                i < 551 ? verdict::a : verdict::b));
    out.push_back(make_judgment(qid(i), judge_j, student_i, student_j, 0,
                                i < 368 ? verdict::a : verdict::b));
  }
  return out;
}

// Sentinel slot values shared with the checked-in golden files.
inline std::map<std::string, std::string> golden_slots(const std::string& template_name) {
  const std::string instruction = "Explain why the sky is blue.";
  const std::string resp1 = "Rayleigh scattering favors shorter wavelengths, so blue light dominates.";
  const std::string resp2 = "Because blue light bounces more.";
  if (template_name == "pairwise_judgment")
    return {{"[INSTRUCTION]", instruction}, {"[RESPONSE A]", resp1}, {"[RESPONSE B]", resp2}};
  if (template_name == "pointwise_recognition")
    return {{"[INSTRUCTION]", instruction},
            {"[RESPONSE]", "The sky looks blue because air molecules scatter short wavelengths most."}};
  if (template_name == "pairwise_recognition")
    return {{"[INSTRUCTION]", instruction}, {"[RESPONSE 1]", resp1}, {"[RESPONSE 2]", resp2}};
  if (template_name == "question_type") return {{"[QUESTION]", "Prove that 2 + 2 = 4."}};
  if (template_name == "judgment_dimension")
    return {{"[JUDGMENT]",
             "Assistant A is more accurate and better organized, with fewer factual mistakes."}};
  return {};
}

inline std::filesystem::path source_dir() { return LEAKSCOPE_SOURCE_DIR; }

}  // namespace testutil
