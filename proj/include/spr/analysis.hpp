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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spr/corpus.hpp"
#include "spr/event.hpp"

namespace spr {

using EventList = std::vector<AnnotationEvent>;

/// The respondent's final decision on one text.
struct TriggerRecord {
    std::string respondent_id;
    std::string text_id;
    Category final_category;
    /// Words revealed at the last category selection; nullopt iff final is none.
    std::optional<std::size_t> trigger_position;
    /// The last selection happened with the whole text already on screen.
    bool post_reveal = false;
    /// Number of category_selected events for the text.
    std::size_t n_changes = 0;

    bool operator==(const TriggerRecord&) const = default;
};

std::string respondent_of(std::span<const AnnotationEvent> events);

/// Trigger = words_revealed of the last category_selected event for the text.
/// Throws IncompleteText when the text was never confirmed.
TriggerRecord extract_trigger(std::span<const AnnotationEvent> events, std::string_view text_id,
                              const ExperimentDef& def);

/// Records for every confirmed text in the session, in confirmation order.
std::vector<TriggerRecord> extract_triggers(std::span<const AnnotationEvent> events,
                                            const ExperimentDef& def, bool include_practice = false);

/// Per-word durations: time from each reveal to the next one, and from the last
/// reveal to the confirmation. Throws IncompleteText.
std::vector<std::int64_t> reading_times(std::span<const AnnotationEvent> events,
                                        std::string_view text_id);

/// Items x categories count table with the same number of raters on every row.
class RatingMatrix {
public:
    /// Throws InvalidMatrix on shape errors, row-sum mismatch, or fewer than
    /// two raters per item.
    RatingMatrix(std::vector<std::string> items, std::vector<std::string> categories,
                 std::vector<std::vector<std::size_t>> counts);

    const std::vector<std::string>& items() const noexcept { return items_; }
    const std::vector<std::string>& categories() const noexcept { return categories_; }
    const std::vector<std::vector<std::size_t>>& counts() const noexcept { return counts_; }
    std::size_t raters_per_item() const noexcept { return raters_; }

private:
    std::vector<std::string> items_;
    std::vector<std::string> categories_;
    std::vector<std::vector<std::size_t>> counts_;
    std::size_t raters_ = 0;
};

/// Mean per-item agreement among rater pairs.
double observed_agreement(const RatingMatrix& m);

/// Fleiss' kappa; nullopt when chance agreement is 1 (every rating in one
/// category).
std::optional<double> fleiss_kappa(const RatingMatrix& m);

/// Sums columns `a` and `b` into column `a` and drops `b`.
RatingMatrix merge_categories(const RatingMatrix& m, std::size_t a, std::size_t b);

inline constexpr std::string_view kNoTriggerLabel = "no_trigger";

/// Items are the texts in the records; categories are word positions
/// 1..max token count plus a no-trigger column. Throws RaggedRaters when texts
/// have different rater counts.
RatingMatrix build_trigger_matrix(std::span<const TriggerRecord> records, const ExperimentDef& def);

/// Same layout over final categories (experiment categories plus none).
RatingMatrix build_category_matrix(std::span<const TriggerRecord> records, const ExperimentDef& def);

/// text id -> trigger of each rater (nullopt when the rater chose none).
using TriggerTable = std::map<std::string, std::vector<std::optional<std::size_t>>>;

TriggerTable trigger_table(std::span<const TriggerRecord> records);

/// Share of rater pairs, pooled over texts, whose triggers differ by at most k.
/// Throws NoComparablePairs.
double tolerance_agreement(const TriggerTable& triggers, std::size_t k);

/// Mean over texts of the share of raters within k words of the modal position
/// (ties go to the smallest position). Throws NoTriggers.
double mode_window_coverage(const TriggerTable& triggers, std::size_t k);

/// Modal trigger position of one text, smallest position on ties.
std::optional<std::size_t> modal_position(std::span<const std::optional<std::size_t>> triggers);

struct ConfusionMatrix {
    std::vector<std::string> labels;  // categories then "none"
    std::vector<std::vector<std::size_t>> counts;  // [truth][assigned]

    std::size_t at(std::string_view truth, std::string_view assigned) const;
    std::size_t row_total(std::string_view truth) const;
    /// Off-diagonal share of the row; nullopt for an empty row.
    std::optional<double> off_diagonal_share(std::string_view truth) const;
    bool is_diagonal() const;
    std::size_t index_of(std::string_view label) const;
};

/// Throws UnknownText for records naming texts outside the experiment.
ConfusionMatrix confusion_matrix(std::span<const TriggerRecord> records, const ExperimentDef& def);

struct FunninessSummary {
    std::size_t count = 0;
    std::optional<double> mean;
    /// histogram[i] counts score funniness_min + i.
    std::vector<std::size_t> histogram;
};

/// Per annotation text (every text appears, rated or not).
std::map<std::string, FunninessSummary> funniness_summary(std::span<const EventList> sessions,
                                                          const ExperimentDef& def);

}  // namespace spr
