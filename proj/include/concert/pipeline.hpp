#pragma once

#include "concert/city_cluster.hpp"
#include "concert/data_model.hpp"
#include "concert/evaluation.hpp"
#include "concert/forest.hpp"
#include "concert/kernel_machines.hpp"
#include "concert/linear_models.hpp"
#include "concert/mlp.hpp"
#include "concert/preprocess.hpp"
#include "concert/tuning.hpp"

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace concert {

struct Hyperparameters {
    SgdConfig sgd;
    SvrConfig svr;
    LogisticConfig logistic;
    SvcConfig svc;
    ForestConfig forest;
    MlpConfig mlp;

    void set_seed(std::uint64_t seed);
};

/// Sets the named hyperparameters of one family. Unknown names throw.
void apply_assignment(Hyperparameters& h, ModelFamily family, const Assignment& values);
/// The family's hyperparameters as name/value pairs, as used in model cards.
Assignment describe(const Hyperparameters& h, ModelFamily family);

struct PipelineOptions {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    bool oversample = true;  // location task only
    unsigned threads = 0;
};

/// Covariates and both targets of a cleaned concert table.
struct TaskData {
    FeatureMatrix x;
    Labels labels;  // empty for the price task
    Vector price;   // raw price, empty for the location task

    std::size_t rows() const { return x.rows(); }
    TaskData take(const std::vector<std::size_t>& rows) const;
};

/// Selects the task's covariates, imputes missing covariates with the
/// column mode and drops rows without a target.
TaskData prepare_task(const RawTable& concerts, Task task);

/// Replaces the Class column by the nearest city cluster of every concert.
RawTable relabel_classes(const RawTable& concerts, const KMeansModel& model);
/// True when every Class cell is present.
bool has_class_labels(const RawTable& concerts);

using FittedModel = std::variant<SgdRegressor, SvrModel, LogisticModel, SvcModel, RandomForest, MlpModel>;

/// A fitted predictor with the preprocessing it was trained behind.
struct TaskEntry {
    Task task = Task::location;
    ModelFamily family = ModelFamily::forest;
    std::vector<std::string> feature_columns;
    std::vector<ColumnKind> feature_kinds;
    std::map<std::string, double> defaults;  // training median (continuous) or mode
    LogSpec log_spec;
    ScalerState scaler;
    bool target_log = false;
    FittedModel model;
    std::map<std::string, double> scores;
};

/// Log transform and min-max scaling exactly as at fit time.
FeatureMatrix transform_features(const TaskEntry& entry, const FeatureMatrix& raw);
/// M x 5 class probabilities, rows summing to one.
Matrix predict_proba(const TaskEntry& entry, const FeatureMatrix& raw);
Labels predict_labels(const TaskEntry& entry, const FeatureMatrix& raw);
/// Price-scale estimates.
Vector predict_price(const TaskEntry& entry, const FeatureMatrix& raw);

/// Fits preprocessing and the model on raw training data.
TaskEntry fit_entry(const TaskData& train, Task task, ModelFamily family, const Hyperparameters& h,
                    const PipelineOptions& options);

/// Validation score: accuracy for location, log-scale RMSPE for price.
double score_entry(const TaskEntry& entry, const TaskData& data);

struct TrainOutcome {
    TaskEntry entry;
    SplitIndices split;
    ClassificationScores classification;  // location
    RegressionScores regression;          // price
    std::optional<ConstantScores> constant;
};

/// Seeded train/test split, fit on the training part, scores on both.
TrainOutcome train_task(const TaskData& data, Task task, ModelFamily family, const Hyperparameters& h,
                        const PipelineOptions& options, bool with_upper_bound = false);

ConstantScores constant_scores(const TaskData& data, const SplitIndices& split);

enum class SearchMethod { grid, random };

struct SearchPlan {
    SearchMethod method = SearchMethod::random;
    std::size_t trials = 50;
    ParamSpace space;
};

/// Search spaces centred on the reference settings of every family.
SearchPlan default_search_plan(ModelFamily family);

struct TuneOutcome {
    SearchResult search;
    Hyperparameters best;
    TrainOutcome final;
};

/// Scores every trial on a seeded 80/20 split inside the training part,
/// then refits the best setting on the whole training part.
TuneOutcome tune_task(const TaskData& data, Task task, ModelFamily family, const Hyperparameters& base,
                      const SearchPlan& plan, const PipelineOptions& options);

/// Mean income and density of the concerts of every class.
struct ClassProfile {
    std::size_t count = 0;
    double income = 0.0;
    double density = 0.0;
};

std::vector<ClassProfile> class_profiles(const RawTable& concerts);

}  // namespace concert
