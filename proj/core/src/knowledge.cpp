#include "auecrl/knowledge.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "auecrl/errors.hpp"
#include "internal/text.hpp"

namespace auecrl {

namespace {

const char* kDefaultKnowledge = R"(# Built-in expression/AU knowledge.
# The Happy and Sad rows encode the classic cheek-raiser + lip-corner-puller
# and inner-brow-raiser + lip-corner-depressor patterns; the remaining rows
# follow common FACS/EMFACS conventions. All of it is editable data.

[expressions]
Angry
Disgust
Fear
Happy
Neutral
Sad
Surprised

[aus]
AU1 inner brow raiser
AU2 outer brow raiser
AU4 brow lowerer
AU5 upper lid raiser
AU6 cheek raiser
AU7 lid tightener
AU9 nose wrinkler
AU12 lip corner puller
AU15 lip corner depressor
AU20 lip stretcher
AU23 lip tightener
AU26 jaw drop

[levels]
primary=0.9 secondary=0.5 none=0.05

[relevance]
Angry : AU4=P AU5=P AU7=P AU23=P AU9=S AU26=S
Disgust : AU9=P AU15=P AU4=S AU7=S
Fear : AU1=P AU2=P AU4=P AU5=P AU20=P AU7=S AU26=S
Happy : AU6=P AU12=P AU26=S
Sad : AU1=P AU15=P AU4=S AU20=S
Surprised : AU1=P AU2=P AU5=P AU26=P

# Neutral has no relevant AUs and is deliberately absent above.

[positive_pairs]
AU1,AU2

[negative_pairs]
AU12,AU15
)";

struct Line {
  int number;
  std::string body;
};

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& msg) {
  std::ostringstream os;
  os << source << ":" << line << ": " << msg;
  throw ParseError(os.str());
}

[[noreturn]] void invalid(const std::string& source, const std::string& msg) {
  throw ValidationError(source + ": " + msg);
}

double parse_probability(const std::string& source, int line, const std::string& tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail(source, line, "bad probability '" + tok + "'");
  }
  return v;
}

}  // namespace

void RelevanceLevels::validate() const {
  if (!(0.0 <= none && none < secondary && secondary < primary && primary <= 1.0)) {
    std::ostringstream os;
    os << "relevance levels must satisfy 0 <= none < secondary < primary <= 1, got none="
       << none << " secondary=" << secondary << " primary=" << primary;
    throw ValidationError(os.str());
  }
}

class KnowledgeParser {
 public:
  KnowledgeParser(const std::string& txt, std::string source)
      : source_(std::move(source)) {
    split_sections(txt);
  }

  KnowledgeBase run() {
    parse_expressions();
    parse_aus();
    parse_levels();
    kb_.relevance_.assign(
        static_cast<size_t>(kb_.num_expressions()) * static_cast<size_t>(kb_.num_aus()),
        Relevance::kNone);
    parse_relevance();
    parse_pairs("positive_pairs", kb_.positive_pairs_);
    parse_pairs("negative_pairs", kb_.negative_pairs_);
    kb_.validate();
    return std::move(kb_);
  }

 private:
  void split_sections(const std::string& txt) {
    static const std::set<std::string> known = {
        "expressions", "aus", "relevance", "levels", "positive_pairs", "negative_pairs"};
    std::string current;
    int number = 0;
    std::istringstream in(txt);
    std::string raw;
    while (std::getline(in, raw)) {
      ++number;
      if (size_t hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::string body{text::trim(raw)};
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']') parse_fail(source_, number, "unterminated section header");
        current = body.substr(1, body.size() - 2);
        if (!known.count(current)) {
          parse_fail(source_, number, "unknown section [" + current + "]");
        }
        continue;
      }
      if (current.empty()) parse_fail(source_, number, "content before any section header");
      sections_[current].push_back({number, std::move(body)});
    }
  }

  void parse_expressions() {
    for (const Line& line : sections_["expressions"]) {
      if (line.body.find(':') != std::string::npos || line.body.find(',') != std::string::npos) {
        parse_fail(source_, line.number, "expression names must not contain ':' or ','");
      }
      kb_.expressions_.push_back(line.body);
    }
  }

  void parse_aus() {
    for (const Line& line : sections_["aus"]) {
      auto toks = text::tokens(line.body);
      const std::string& id = toks.front();
      if (id.size() < 3 || id.compare(0, 2, "AU") != 0) {
        parse_fail(source_, line.number, "AU identifier must look like AU<number>, got '" + id + "'");
      }
      int facs = 0;
      auto [ptr, ec] = std::from_chars(id.data() + 2, id.data() + id.size(), facs);
      if (ec != std::errc() || ptr != id.data() + id.size() || facs <= 0) {
        parse_fail(source_, line.number, "bad FACS number in '" + id + "'");
      }
      std::string display;
      for (size_t i = 1; i < toks.size(); ++i) {
        if (i > 1) display += ' ';
        display += toks[i];
      }
      kb_.aus_.push_back({id, facs, display});
    }
  }

  void parse_levels() {
    for (const Line& line : sections_["levels"]) {
      for (const std::string& tok : text::tokens(line.body)) {
        auto kv = text::split(tok, '=');
        if (kv.size() != 2) parse_fail(source_, line.number, "expected key=value, got '" + tok + "'");
        double v = parse_probability(source_, line.number, kv[1]);
        if (kv[0] == "primary") kb_.levels_.primary = v;
        else if (kv[0] == "secondary") kb_.levels_.secondary = v;
        else if (kv[0] == "none") kb_.levels_.none = v;
        else parse_fail(source_, line.number, "unknown level '" + kv[0] + "'");
      }
    }
  }

  void parse_relevance() {
    for (const Line& line : sections_["relevance"]) {
      size_t colon = line.body.find(':');
      if (colon == std::string::npos) {
        parse_fail(source_, line.number, "relevance line needs '<expression> : <au>=P|S'");
      }
      std::string expr{text::trim(std::string_view(line.body).substr(0, colon))};
      int e = kb_.expression_index(expr);
      if (e < 0) invalid(source_, "relevance for unknown expression '" + expr + "'");
      auto assignments = text::tokens(std::string_view(line.body).substr(colon + 1));
      if (assignments.empty()) parse_fail(source_, line.number, "empty relevance assignment list");
      for (const std::string& tok : assignments) {
        auto kv = text::split(tok, '=');
        if (kv.size() != 2 || kv[1].size() != 1 || (kv[1] != "P" && kv[1] != "S")) {
          parse_fail(source_, line.number, "expected <au>=P|S, got '" + tok + "'");
        }
        int a = kb_.au_index(kv[0]);
        if (a < 0) invalid(source_, "relevance for unknown AU '" + kv[0] + "'");
        Relevance& cell =
            kb_.relevance_[static_cast<size_t>(e) * static_cast<size_t>(kb_.num_aus()) +
                           static_cast<size_t>(a)];
        if (cell != Relevance::kNone) {
          invalid(source_, "duplicate relevance assignment for " + expr + "/" + kv[0]);
        }
        cell = kv[1] == "P" ? Relevance::kPrimary : Relevance::kSecondary;
      }
    }
  }

  void parse_pairs(const std::string& section, std::vector<IndexPair>& out) {
    std::set<IndexPair> seen;
    for (const Line& line : sections_[section]) {
      auto parts = text::split(line.body, ',');
      if (parts.size() != 2) parse_fail(source_, line.number, "pair line needs '<au>,<au>'");
      int a = kb_.au_index(std::string(text::trim(parts[0])));
      int b = kb_.au_index(std::string(text::trim(parts[1])));
      if (a < 0 || b < 0) invalid(source_, "pair references unknown AU in '" + line.body + "'");
      if (a == b) invalid(source_, "pair repeats the same AU: '" + line.body + "'");
      seen.insert({std::min(a, b), std::max(a, b)});
    }
    out.assign(seen.begin(), seen.end());
  }

  std::string source_;
  std::map<std::string, std::vector<Line>> sections_;
  KnowledgeBase kb_;
};

KnowledgeBase KnowledgeBase::parse(const std::string& txt, const std::string& source_name) {
  return KnowledgeParser(txt, source_name).run();
}

KnowledgeBase KnowledgeBase::builtin_default() {
  return parse(default_knowledge_text(), "<builtin>");
}

Relevance KnowledgeBase::relevance(int expression, int au) const {
  return relevance_[static_cast<size_t>(expression) * static_cast<size_t>(num_aus()) +
                    static_cast<size_t>(au)];
}

int KnowledgeBase::expression_index(const std::string& name) const {
  for (size_t i = 0; i < expressions_.size(); ++i) {
    if (expressions_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int KnowledgeBase::au_index(const std::string& id) const {
  for (size_t i = 0; i < aus_.size(); ++i) {
    if (aus_[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void KnowledgeBase::validate() const {
  if (num_expressions() < 2) throw ValidationError("need at least 2 expressions");
  if (num_aus() < 2) throw ValidationError("need at least 2 AUs");
  {
    std::set<std::string> names(expressions_.begin(), expressions_.end());
    if (names.size() != expressions_.size()) {
      throw ValidationError("duplicate expression names");
    }
  }
  {
    std::set<std::string> ids;
    for (const AuInfo& au : aus_) ids.insert(au.id);
    if (ids.size() != aus_.size()) throw ValidationError("duplicate AU identifiers");
  }
  levels_.validate();
  auto check_pairs = [this](const std::vector<IndexPair>& pairs) {
    for (const IndexPair& p : pairs) {
      if (p.first == p.second) throw ValidationError("pair repeats an AU index");
      if (p.first < 0 || p.second >= num_aus() || p.first >= p.second) {
        throw ValidationError("pair index out of range or not canonical");
      }
    }
  };
  check_pairs(positive_pairs_);
  check_pairs(negative_pairs_);
  for (const IndexPair& p : positive_pairs_) {
    if (std::find(negative_pairs_.begin(), negative_pairs_.end(), p) != negative_pairs_.end()) {
      std::ostringstream os;
      os << "pair (" << aus_[static_cast<size_t>(p.first)].id << ","
         << aus_[static_cast<size_t>(p.second)].id
         << ") appears in both positive and negative sets";
      throw ValidationError(os.str());
    }
  }
}

KnowledgeBase load_knowledge(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open knowledge file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return KnowledgeBase::parse(buf.str(), path);
}

PriorMatrix prior_matrix(const KnowledgeBase& kb, const RelevanceLevels& levels) {
  levels.validate();
  const int e_count = kb.num_expressions();
  const int a_count = kb.num_aus();
  Tensor values = Tensor::zeros({e_count, a_count});
  for (int e = 0; e < e_count; ++e) {
    for (int a = 0; a < a_count; ++a) {
      switch (kb.relevance(e, a)) {
        case Relevance::kPrimary: values(e, a) = levels.primary; break;
        case Relevance::kSecondary: values(e, a) = levels.secondary; break;
        case Relevance::kNone: values(e, a) = levels.none; break;
      }
    }
  }
  return PriorMatrix{std::move(values)};
}

std::pair<std::vector<IndexPair>, std::vector<IndexPair>> pair_sets(const KnowledgeBase& kb) {
  return {kb.positive_pairs(), kb.negative_pairs()};
}

const std::string& default_knowledge_text() {
  static const std::string text = kDefaultKnowledge;
  return text;
}

}  // namespace auecrl
