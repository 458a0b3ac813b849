// Copyright 2026 The spr-annotate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spr/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "spr/errors.hpp"

namespace spr {

std::string respondent_of(std::span<const AnnotationEvent> events) {
    for (const auto& e : events) {
        if (e.kind == EventKind::SessionStarted) return e.payload.respondent_id;
    }
    return {};
}

TriggerRecord extract_trigger(std::span<const AnnotationEvent> events, std::string_view text_id,
                              const ExperimentDef& def) {
    const AnnotationEvent* last_selection = nullptr;
    const AnnotationEvent* confirmation = nullptr;
    std::size_t selections = 0;
    for (const auto& e : events) {
        if (e.payload.text_id != text_id) continue;
        if (e.kind == EventKind::CategorySelected) {
            last_selection = &e;
            ++selections;
        } else if (e.kind == EventKind::TextConfirmed) {
            confirmation = &e;
            break;
        }
    }
    if (confirmation == nullptr || def.find_text(text_id) == nullptr) {
        throw IncompleteText(std::string(text_id));
    }

    TriggerRecord r;
    r.respondent_id = respondent_of(events);
    r.text_id = std::string(text_id);
    r.final_category = confirmation->payload.final_category;
    r.n_changes = selections;
    if (r.final_category && last_selection != nullptr) {
        r.trigger_position = last_selection->payload.words_revealed;
        r.post_reveal = last_selection->payload.full_text_visible;
    }
    return r;
}

std::vector<TriggerRecord> extract_triggers(std::span<const AnnotationEvent> events,
                                            const ExperimentDef& def, bool include_practice) {
    std::vector<TriggerRecord> out;
    const auto respondent = respondent_of(events);
    // One pass: selections accumulate until the confirmation for the text.
    std::map<std::string, std::pair<const AnnotationEvent*, std::size_t>, std::less<>> selections;
    for (const auto& e : events) {
        const auto& p = e.payload;
        if (e.kind == EventKind::CategorySelected) {
            auto& [last, n] = selections[p.text_id];
            last = &e;
            ++n;
        } else if (e.kind == EventKind::TextConfirmed) {
            if ((p.practice || def.is_practice(p.text_id)) && !include_practice) continue;
            TriggerRecord r;
            r.respondent_id = respondent;
            r.text_id = p.text_id;
            r.final_category = p.final_category;
            auto it = selections.find(p.text_id);
            if (it != selections.end()) {
                r.n_changes = it->second.second;
                if (r.final_category) {
                    r.trigger_position = it->second.first->payload.words_revealed;
                    r.post_reveal = it->second.first->payload.full_text_visible;
                }
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<std::int64_t> reading_times(std::span<const AnnotationEvent> events,
                                        std::string_view text_id) {
    std::vector<std::int64_t> reveals;
    std::optional<std::int64_t> confirmed_at;
    for (const auto& e : events) {
        if (e.payload.text_id != text_id) continue;
        if (e.kind == EventKind::WordRevealed) {
            reveals.push_back(e.t_client_ms);
        } else if (e.kind == EventKind::TextConfirmed) {
            confirmed_at = e.t_client_ms;
            break;
        }
    }
    if (!confirmed_at) throw IncompleteText(std::string(text_id));
    std::vector<std::int64_t> durations;
    durations.reserve(reveals.size());
    for (std::size_t i = 0; i < reveals.size(); ++i) {
        const auto end = i + 1 < reveals.size() ? reveals[i + 1] : *confirmed_at;
        durations.push_back(end - reveals[i]);
    }
    return durations;
}

RatingMatrix::RatingMatrix(std::vector<std::string> items, std::vector<std::string> categories,
                           std::vector<std::vector<std::size_t>> counts)
    : items_(std::move(items)), categories_(std::move(categories)), counts_(std::move(counts)) {
    if (items_.empty()) throw InvalidMatrix("rating matrix has no items");
    if (counts_.size() != items_.size()) throw InvalidMatrix("one count row per item is required");
    if (categories_.empty()) throw InvalidMatrix("rating matrix has no categories");
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i].size() != categories_.size()) {
            throw InvalidMatrix("row " + std::to_string(i) + " has the wrong number of categories");
        }
        const auto sum = std::accumulate(counts_[i].begin(), counts_[i].end(), std::size_t{0});
        if (i == 0) {
            raters_ = sum;
        } else if (sum != raters_) {
            throw InvalidMatrix("row '" + items_[i] + "' sums to " + std::to_string(sum) +
                                " raters, expected " + std::to_string(raters_));
        }
    }
    if (raters_ < 2) throw InvalidMatrix("at least two raters per item are required");
}

namespace {

// Integer parts of the Fleiss statistics; summed exactly so the result does not
// depend on row or column order.
struct FleissTerms {
    double observed;  // P-bar
    std::uint64_t chance_num;
    std::uint64_t chance_den;
};

FleissTerms fleiss_terms(const RatingMatrix& m) {
    const std::uint64_t n = m.raters_per_item();
    const std::uint64_t items = m.items().size();
    std::uint64_t sum_sq = 0;
    std::vector<std::uint64_t> column(m.categories().size(), 0);
    for (const auto& row : m.counts()) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            sum_sq += static_cast<std::uint64_t>(row[j]) * row[j];
            column[j] += row[j];
        }
    }
    std::uint64_t col_sq = 0;
    for (auto c : column) col_sq += c * c;
    const double observed = static_cast<double>(sum_sq - items * n) /
                            static_cast<double>(items * n * (n - 1));
    return {observed, col_sq, (items * n) * (items * n)};
}

}  // namespace

double observed_agreement(const RatingMatrix& m) { return fleiss_terms(m).observed; }

std::optional<double> fleiss_kappa(const RatingMatrix& m) {
    const auto t = fleiss_terms(m);
    if (t.chance_num == t.chance_den) return std::nullopt;
    const double chance = static_cast<double>(t.chance_num) / static_cast<double>(t.chance_den);
    return (t.observed - chance) / (1.0 - chance);
}

RatingMatrix merge_categories(const RatingMatrix& m, std::size_t a, std::size_t b) {
    const auto k = m.categories().size();
    if (a >= k || b >= k || a == b) throw InvalidMatrix("invalid columns to merge");
    auto categories = m.categories();
    categories[a] += "+" + categories[b];
    categories.erase(categories.begin() + static_cast<std::ptrdiff_t>(b));
    auto counts = m.counts();
    for (auto& row : counts) {
        row[a] += row[b];
        row.erase(row.begin() + static_cast<std::ptrdiff_t>(b));
    }
    return RatingMatrix(m.items(), std::move(categories), std::move(counts));
}

namespace {

/// Groups records by text (sorted by text id) and checks every text has the
/// same number of raters.
std::map<std::string, std::vector<const TriggerRecord*>> by_text(std::span<const TriggerRecord> records) {
    std::map<std::string, std::vector<const TriggerRecord*>> grouped;
    for (const auto& r : records) grouped[r.text_id].push_back(&r);
    std::optional<std::size_t> raters;
    for (const auto& [text, rs] : grouped) {
        if (raters && *raters != rs.size()) {
            throw RaggedRaters("text '" + text + "' has " + std::to_string(rs.size()) + " raters, expected " +
                               std::to_string(*raters));
        }
        raters = rs.size();
    }
    return grouped;
}

}  // namespace

RatingMatrix build_trigger_matrix(std::span<const TriggerRecord> records, const ExperimentDef& def) {
    const auto grouped = by_text(records);
    std::size_t max_tokens = 0;
    for (const auto& [text, _] : grouped) {
        const auto* item = def.find_text(text);
        if (item == nullptr) throw UnknownText(text);
        max_tokens = std::max(max_tokens, item->tokens.size());
    }
    std::vector<std::string> categories;
    for (std::size_t p = 1; p <= max_tokens; ++p) categories.push_back(std::to_string(p));
    categories.emplace_back(kNoTriggerLabel);

    std::vector<std::string> items;
    std::vector<std::vector<std::size_t>> counts;
    for (const auto& [text, rs] : grouped) {
        items.push_back(text);
        std::vector<std::size_t> row(categories.size(), 0);
        for (const auto* r : rs) {
            if (r->trigger_position && *r->trigger_position >= 1 && *r->trigger_position <= max_tokens) {
                ++row[*r->trigger_position - 1];
            } else {
                ++row.back();
            }
        }
        counts.push_back(std::move(row));
    }
    return RatingMatrix(std::move(items), std::move(categories), std::move(counts));
}

RatingMatrix build_category_matrix(std::span<const TriggerRecord> records, const ExperimentDef& def) {
    const auto grouped = by_text(records);
    std::vector<std::string> categories = def.categories;
    categories.emplace_back(kNoneLabel);
    std::vector<std::string> items;
    std::vector<std::vector<std::size_t>> counts;
    for (const auto& [text, rs] : grouped) {
        if (def.find_text(text) == nullptr) throw UnknownText(text);
        items.push_back(text);
        std::vector<std::size_t> row(categories.size(), 0);
        for (const auto* r : rs) {
            const auto label = label_of(r->final_category);
            auto it = std::find(categories.begin(), categories.end(), label);
            if (it == categories.end()) throw AnalysisError("unknown category '" + label + "'");
            ++row[static_cast<std::size_t>(it - categories.begin())];
        }
        counts.push_back(std::move(row));
    }
    return RatingMatrix(std::move(items), std::move(categories), std::move(counts));
}

TriggerTable trigger_table(std::span<const TriggerRecord> records) {
    TriggerTable table;
    for (const auto& r : records) table[r.text_id].push_back(r.trigger_position);
    return table;
}

double tolerance_agreement(const TriggerTable& triggers, std::size_t k) {
    std::uint64_t pairs = 0;
    std::uint64_t agreeing = 0;
    for (const auto& [text, ts] : triggers) {
        for (std::size_t a = 0; a < ts.size(); ++a) {
            if (!ts[a]) continue;
            for (std::size_t b = a + 1; b < ts.size(); ++b) {
                if (!ts[b]) continue;
                ++pairs;
                const auto diff = *ts[a] > *ts[b] ? *ts[a] - *ts[b] : *ts[b] - *ts[a];
                if (diff <= k) ++agreeing;
            }
        }
    }
    if (pairs == 0) throw NoComparablePairs();
    return static_cast<double>(agreeing) / static_cast<double>(pairs);
}

std::optional<std::size_t> modal_position(std::span<const std::optional<std::size_t>> triggers) {
    std::map<std::size_t, std::size_t> freq;
    for (const auto& t : triggers) {
        if (t) ++freq[*t];
    }
    std::optional<std::size_t> mode;
    std::size_t best = 0;
    for (const auto& [pos, n] : freq) {  // ascending, so ties keep the smallest
        if (n > best) {
            best = n;
            mode = pos;
        }
    }
    return mode;
}

double mode_window_coverage(const TriggerTable& triggers, std::size_t k) {
    double total = 0.0;
    std::size_t texts = 0;
    for (const auto& [text, ts] : triggers) {
        const auto mode = modal_position(ts);
        if (!mode) continue;
        std::size_t defined = 0;
        std::size_t covered = 0;
        for (const auto& t : ts) {
            if (!t) continue;
            ++defined;
            const auto diff = *t > *mode ? *t - *mode : *mode - *t;
            if (diff <= k) ++covered;
        }
        total += static_cast<double>(covered) / static_cast<double>(defined);
        ++texts;
    }
    if (texts == 0) throw NoTriggers();
    return total / static_cast<double>(texts);
}

std::size_t ConfusionMatrix::index_of(std::string_view label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw AnalysisError("unknown label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels.begin());
}

std::size_t ConfusionMatrix::at(std::string_view truth, std::string_view assigned) const {
    return counts[index_of(truth)][index_of(assigned)];
}

std::size_t ConfusionMatrix::row_total(std::string_view truth) const {
    const auto& row = counts[index_of(truth)];
    return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

std::optional<double> ConfusionMatrix::off_diagonal_share(std::string_view truth) const {
    const auto total = row_total(truth);
    if (total == 0) return std::nullopt;
    const auto i = index_of(truth);
    return static_cast<double>(total - counts[i][i]) / static_cast<double>(total);
}

bool ConfusionMatrix::is_diagonal() const {
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            if (i != j && counts[i][j] != 0) return false;
        }
    }
    return true;
}

ConfusionMatrix confusion_matrix(std::span<const TriggerRecord> records, const ExperimentDef& def) {
    ConfusionMatrix m;
    m.labels = def.categories;
    m.labels.emplace_back(kNoneLabel);
    m.counts.assign(m.labels.size(), std::vector<std::size_t>(m.labels.size(), 0));
    for (const auto& r : records) {
        const auto* text = def.find_text(r.text_id);
        if (text == nullptr) throw UnknownText(r.text_id);
        ++m.counts[m.index_of(label_of(text->truth_category))][m.index_of(label_of(r.final_category))];
    }
    return m;
}

std::map<std::string, FunninessSummary> funniness_summary(std::span<const EventList> sessions,
                                                          const ExperimentDef& def) {
    const auto bins = static_cast<std::size_t>(def.config.funniness_max - def.config.funniness_min + 1);
    std::map<std::string, FunninessSummary> out;
    for (const auto& id : def.annotation_text_ids()) out[id].histogram.assign(bins, 0);
    std::map<std::string, std::int64_t> sums;
    for (const auto& events : sessions) {
        for (const auto& e : events) {
            if (e.kind != EventKind::FunninessRated) continue;
            auto it = out.find(e.payload.text_id);
            if (it == out.end()) continue;
            const auto score = e.payload.score;
            if (score < def.config.funniness_min || score > def.config.funniness_max) continue;
            ++it->second.count;
            ++it->second.histogram[static_cast<std::size_t>(score - def.config.funniness_min)];
            sums[e.payload.text_id] += score;
        }
    }
    for (auto& [id, summary] : out) {
        if (summary.count > 0) {
            summary.mean = static_cast<double>(sums[id]) / static_cast<double>(summary.count);
        }
    }
    return out;
}

}  // namespace spr
