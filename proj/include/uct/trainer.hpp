#pragma once
// trainer.hpp - assembles the total objective, runs the alternating
// discriminator/generator optimization, and owns checkpoints and the metrics
// stream.

#include <iosfwd>
#include <map>
#include <memory>

#include "uct/config.hpp"
#include "uct/dataset.hpp"
#include "uct/generator.hpp"

namespace uct {

// base_lr * 0.1^floor(iteration / 1e5)
double lr_schedule(long iteration, double base_lr);

struct GeneratorLossParts {
    double upper_penalty = 0.0;
    double central_penalty = 0.0;
    double bam = 0.0;
    double feature = 0.0;
    double classifier = 0.0;
    double adv = 0.0;
    double rec = 0.0;
};

// Weighted total; throws NumericError naming the first non-finite part.
double total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights);

struct StepMetrics {
    long iteration = 0;
    double lr = 0.0;
    double total = 0.0;
    double disc_loss = 0.0;
    double walltime = 0.0;  // seconds
    // per-term values actually present this step (ablated terms are absent)
    std::map<std::string, double> sub_losses;
};

class Trainer {
public:
    explicit Trainer(RunConfig cfg, bool pretrain_classifier = true);

    // One discriminator update then one generator update over both directions.
    // Batches are the per-generator mixed-domain streams. Throws NumericError
    // on any non-finite loss, leaving parameters and moments unmodified.
    StepMetrics train_step(const std::vector<BatchItem>& batch_a,
                           const std::vector<BatchItem>& batch_b);

    // Full loop: seeded batch draws from the two handles, metrics streaming,
    // periodic checkpoints under ckpt_dir (empty path disables them).
    void run(const DatasetHandle& opacity, const DatasetHandle& nonopacity,
             std::ostream* metrics_log, const std::filesystem::path& ckpt_dir);

    void save_checkpoint(const std::filesystem::path& path) const;
    static std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path);

    long iteration() const { return iteration_; }
    const RunConfig& config() const { return cfg_; }
    GeneratorNet& gen_a() { return *gen_a_; }
    GeneratorNet& gen_b() { return *gen_b_; }
    DiscriminatorNet& disc_nonopacity() { return *disc_nonop_; }
    DiscriminatorNet& disc_opacity() { return *disc_op_; }
    PhantomClassifier* classifier() { return classifier_.get(); }
    const PhantomClassifier* classifier() const { return classifier_.get(); }

    // Deterministic per-iteration stream seeds used by run(); exposed so other
    // callers can replay identical batches.
    std::uint64_t batch_seed(long iteration, int direction) const;

private:
    struct DirectionLosses;
    DirectionLosses direction_losses(GeneratorNet& gen, GeneratorNet& gen_back,
                                     DiscriminatorNet& disc, const std::vector<BatchItem>& batch,
                                     const Tensor& images);

    RunConfig cfg_;
    long iteration_ = 0;
    std::unique_ptr<GeneratorNet> gen_a_, gen_b_;
    std::unique_ptr<DiscriminatorNet> disc_nonop_, disc_op_;  // judge G_A / G_B outputs
    std::unique_ptr<PhantomClassifier> classifier_;
    std::unique_ptr<nn::Adam> opt_gen_a_, opt_gen_b_, opt_disc_nonop_, opt_disc_op_;
};

}  // namespace uct
