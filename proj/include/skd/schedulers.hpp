#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "skd/data.hpp"
#include "skd/losses.hpp"
#include "skd/models.hpp"
#include "skd/optimizer.hpp"

namespace skd {

enum class ScheduleMode { none, online, spaced, self_kd, spaced_self, constant_ahead, offline };

ScheduleMode schedule_mode_from_string(const std::string& s);
std::string to_string(ScheduleMode m);

enum class Actor { teacher, student, joint };
enum class LossKind { task_only, composite_kd, self_kd_full };

std::string to_string(Actor a);
std::string to_string(LossKind k);

/// One atomic update of a training schedule.
struct ScheduleEvent {
    std::size_t step;      // position in the run's event sequence
    Actor actor;
    std::size_t batch_id;  // global index into the shuffled batch stream
    LossKind loss_kind;
    double epoch_float;    // batch_id / batches_per_epoch
    // parameter hashes after the update; recorded only when requested
    std::uint64_t student_hash = 0;
    std::uint64_t teacher_hash = 0;
};

struct ScheduleConfig {
    ScheduleMode mode = ScheduleMode::online;
    double s_epochs = 1.5;  // space interval as a fraction of the training set
    // when nonzero, overrides the epoch-based interval with an exact batch count
    std::size_t s_batches_override = 0;
    double start_epoch = 0.0;
    double end_epoch = std::numeric_limits<double>::infinity();
    KDLossConfig loss;

    void validate() const;
};

/// Space interval in batches: round(s_epochs * ceil(N/B)), clamped to >= 1.
std::size_t to_batches(double s_epochs, std::size_t dataset_size, std::size_t batch_size);

/// Spaced-teacher timestamp: ceil(t/s)*s, so t <= k(t) <= t+s.
std::size_t k_of_t(std::size_t t, std::size_t s);

/// Distillation window (start/end in epochs of data-stream position).
/// Outside the window the student falls back to the task loss alone; the
/// teacher keeps its own schedule.
struct WindowState {
    bool distill;
    KDLossConfig effective;
    LossKind kind;
};
WindowState apply_window(const ScheduleConfig& cfg, double epoch_float);

struct EpochMetrics {
    std::size_t epoch;
    std::string actor;  // "student", "teacher" or "net"
    double train_loss;
    double train_acc;
    std::optional<double> test_acc;
};

struct RunRecord {
    std::vector<ScheduleEvent> events;
    std::vector<EpochMetrics> metrics;
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;
    std::size_t failed_step = 0;  // set when a numeric failure aborted the run
};

void events_to_jsonl(const std::vector<ScheduleEvent>& events, std::ostream& out);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    std::uint64_t data_seed = 1;  // shared shuffle seed: one data flow for both actors
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t eval_every = 1;  // test-set evaluation cadence in epochs
    bool record_param_hashes = false;
    ScheduleConfig schedule;
};

struct EvalResult {
    double loss;
    double acc;
};
EvalResult evaluate(const BlockNet& net, const Dataset& ds, std::size_t batch_size);

// Training schedules. Teacher/student pairs must agree on class count; nets
// arrive initialized and are trained in place. `test` may be null.
RunRecord run_none(BlockNet& net, const Dataset& train, const Dataset* test, const TrainConfig& cfg);
RunRecord run_online_kd(BlockNet& teacher, BlockNet& student, const Dataset& train,
                        const Dataset* test, const TrainConfig& cfg);
RunRecord run_spaced_kd(BlockNet& teacher, BlockNet& student, const Dataset& train,
                        const Dataset* test, const TrainConfig& cfg);
RunRecord run_self_kd(BlockNet& net, const Dataset& train, const Dataset* test,
                      const TrainConfig& cfg);
RunRecord run_spaced_self_kd(BlockNet& net, const Dataset& train, const Dataset* test,
                             const TrainConfig& cfg);
RunRecord run_constant_ahead(BlockNet& teacher, BlockNet& student, const Dataset& train,
                             const Dataset* test, const TrainConfig& cfg);
/// Teacher weights come from a checkpoint and stay frozen for the whole run.
RunRecord run_offline_kd(BlockNet& teacher, const std::string& teacher_checkpoint, BlockNet& student,
                         const Dataset& train, const Dataset* test, const TrainConfig& cfg);

}  // namespace skd
