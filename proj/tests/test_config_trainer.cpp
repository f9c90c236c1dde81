#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "uct/trainer.hpp"

using namespace uct;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(bool cdam_on) {
    RunConfig c;
    c.image_size = 16;
    c.width = 8;
    c.depth = 1;
    c.n_res = 1;
    c.disc_width = 4;
    c.disc_blocks = 2;
    c.classifier_width = 2;
    c.batch = 2;
    c.iters = 2;
    c.phantom_train_count = 4;
    c.augment = false;
    if (!cdam_on) {
        c.ablation.fa = false;
        c.ablation.lca = false;
    }
    return c;
}

std::vector<BatchItem> phantom_batch(int n, int size, int blobs, std::uint64_t seed,
                                     DomainLabel label) {
    std::vector<BatchItem> batch;
    for (int i = 0; i < n; ++i) {
        PhantomSample s = synth_phantom(seed + static_cast<std::uint64_t>(i), size, blobs);
        BatchItem item;
        item.image = s.image;
        item.domain_label = label;
        item.gt_opacity_mask = s.gt_opacity_mask;
        batch.push_back(std::move(item));
    }
    return batch;
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / "uct_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("config text round trip and presets") {
    RunConfig desk = preset_config("desk");
    std::string snap = desk.to_text();
    RunConfig re = parse_config_text(snap, RunConfig{});
    CHECK(re.to_text() == snap);

    RunConfig paper = preset_config("paper");
    CHECK(paper.image_size == 512);
    CHECK(paper.batch == 2);
    CHECK(paper.iters == 250000);
    CHECK(paper.lr == 1e-4);
    CHECK(paper.filter.q.size() == 14);

    CHECK_THROWS_AS(preset_config("nope"), InvalidArgument);
}

TEST_CASE("config parser rejects unknown keys with a line number") {
    try {
        parse_config_text("[train]\nbogus_key = 1\n", RunConfig{});
        FAIL("expected throw");
    } catch (const InvalidArgument& e) {
        std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("train.bogus_key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("[train]\nlr = banana\n", RunConfig{}), InvalidArgument);
    CHECK_THROWS_AS(parse_config_text("no_equals_sign\n", RunConfig{}), InvalidArgument);

    RunConfig c = parse_config_text("[train]\nlr = 0.5\n# comment\n\n[ablation]\nfa = off\n",
                                    RunConfig{});
    CHECK(c.lr == 0.5);
    CHECK_FALSE(c.ablation.fa);
}

TEST_CASE("config validation") {
    RunConfig c;
    c.rho = 2.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = RunConfig{};
    c.weights.lambda_adv = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = RunConfig{};
    c.image_size = 60;  // not divisible by 2^3
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = RunConfig{};
    c.ablation.lca = true;
    c.filter.q = {0, 0};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("lr schedule") {
    CHECK(lr_schedule(0, 1e-4) == doctest::Approx(1e-4));
    CHECK(lr_schedule(99999, 1e-4) == doctest::Approx(1e-4));
    CHECK(lr_schedule(100000, 1e-4) == doctest::Approx(1e-5));
    CHECK(lr_schedule(250000, 1e-4) == doctest::Approx(1e-6));
    CHECK_THROWS_AS(lr_schedule(-1, 1e-4), InvalidArgument);
}

TEST_CASE("total generator loss weighted sum") {
    LossWeights w;  // paper defaults
    GeneratorLossParts zero;
    CHECK(total_generator_loss(zero, w) == 0.0);

    GeneratorLossParts unit;
    unit.upper_penalty = 1.0;
    unit.central_penalty = 0.0;
    unit.bam = 1.0;
    unit.feature = 1.0;
    unit.classifier = 1.0;
    unit.adv = 1.0;
    unit.rec = 1.0;
    CHECK(total_generator_loss(unit, w) == doctest::Approx(4.11).epsilon(1e-9));

    // doubling one lambda doubles exactly that contribution
    LossWeights w2 = w;
    w2.lambda_adv *= 2.0;
    CHECK(total_generator_loss(unit, w2) - total_generator_loss(unit, w) ==
          doctest::Approx(2.0));

    GeneratorLossParts bad = unit;
    bad.feature = std::numeric_limits<double>::quiet_NaN();
    try {
        total_generator_loss(bad, w);
        FAIL("expected throw");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("feature") != std::string::npos);
    }
}

TEST_CASE("train_step changes generator parameters and is deterministic") {
    RunConfig cfg = tiny_config(false);
    auto batch_a = phantom_batch(2, 16, 2, 100, DomainLabel::Opacity);
    auto batch_b = phantom_batch(2, 16, 0, 200, DomainLabel::NonOpacity);

    Trainer t1(cfg), t2(cfg);
    std::vector<double> before = t1.gen_a().params().flat_values();
    StepMetrics m1 = t1.train_step(batch_a, batch_b);
    StepMetrics m2 = t2.train_step(batch_a, batch_b);
    CHECK(t1.gen_a().params().flat_values() != before);
    CHECK(m1.total == m2.total);
    CHECK(m1.disc_loss == m2.disc_loss);
    CHECK(m1.sub_losses == m2.sub_losses);
    CHECK(m1.iteration == 1);
}

TEST_CASE("ablation flags control which sub losses appear") {
    RunConfig cfg = tiny_config(false);
    cfg.ablation.aaspm = false;
    cfg.ablation.baml = false;
    Trainer t(cfg);
    auto batch_a = phantom_batch(2, 16, 2, 300, DomainLabel::Opacity);
    auto batch_b = phantom_batch(2, 16, 0, 400, DomainLabel::NonOpacity);
    StepMetrics m = t.train_step(batch_a, batch_b);
    for (const auto& [k, v] : m.sub_losses) {
        bool adv_or_rec = k.rfind("adv", 0) == 0 || k.rfind("rec", 0) == 0;
        CHECK(adv_or_rec);
    }
    CHECK(m.sub_losses.count("adv_a") == 1);
    CHECK(m.sub_losses.count("rec_b") == 1);
}

TEST_CASE("frozen classifier across training steps") {
    RunConfig cfg = tiny_config(true);
    Trainer t(cfg, /*pretrain_classifier=*/false);
    REQUIRE(t.classifier() != nullptr);
    std::vector<double> before = t.classifier()->params().flat_values();
    auto batch_a = phantom_batch(2, 16, 2, 500, DomainLabel::Opacity);
    auto batch_b = phantom_batch(2, 16, 0, 600, DomainLabel::NonOpacity);
    for (int i = 0; i < 3; ++i) t.train_step(batch_a, batch_b);
    CHECK(t.classifier()->params().flat_values() == before);
    CHECK(t.classifier()->frozen());
}

TEST_CASE("checkpoint round trip") {
    fs::path d = fresh_dir("ckpt");
    RunConfig cfg = tiny_config(false);
    Trainer t(cfg);
    auto batch_a = phantom_batch(2, 16, 2, 700, DomainLabel::Opacity);
    auto batch_b = phantom_batch(2, 16, 0, 800, DomainLabel::NonOpacity);
    t.train_step(batch_a, batch_b);

    fs::path p1 = d / "a.bin", p2 = d / "b.bin";
    t.save_checkpoint(p1);
    auto loaded = Trainer::load_checkpoint(p1);
    CHECK(loaded->iteration() == 1);
    loaded->save_checkpoint(p2);

    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    CHECK(slurp(p1) == slurp(p2));  // byte-identical re-save

    // identical subsequent step on a fixed batch
    StepMetrics ma = t.train_step(batch_a, batch_b);
    StepMetrics mb = loaded->train_step(batch_a, batch_b);
    CHECK(ma.total == mb.total);
    CHECK(ma.disc_loss == mb.disc_loss);
    CHECK(ma.sub_losses == mb.sub_losses);
}

TEST_CASE("checkpoint corruption and version mismatch") {
    fs::path d = fresh_dir("ckpt_bad");
    CHECK_THROWS_AS(Trainer::load_checkpoint(d / "missing.bin"), IoError);

    std::ofstream(d / "garbage.bin", std::ios::binary) << "not a checkpoint at all";
    CHECK_THROWS_AS(Trainer::load_checkpoint(d / "garbage.bin"), IoError);

    // valid magic, bad version header
    std::string header = "{\"version\": 99}";
    std::ofstream f(d / "badver.bin", std::ios::binary);
    f.write("UCTCKPT1", 8);
    std::uint64_t n = header.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f << header;
    f.close();
    CHECK_THROWS_AS(Trainer::load_checkpoint(d / "badver.bin"), IoError);
}

TEST_CASE("run loop writes metrics and checkpoints, resume continues") {
    fs::path d = fresh_dir("runloop");
    RunConfig cfg = tiny_config(false);
    cfg.iters = 4;
    cfg.checkpoint_every = 2;
    cfg.log_every = 1;

    std::vector<PhantomSample> op, nonop;
    for (int i = 0; i < 4; ++i) {
        op.push_back(synth_phantom(static_cast<std::uint64_t>(i), 16, 2));
        nonop.push_back(synth_phantom(50 + static_cast<std::uint64_t>(i), 16, 0));
    }
    DatasetHandle oh = DatasetHandle::from_samples(op, DomainLabel::Opacity);
    DatasetHandle nh = DatasetHandle::from_samples(nonop, DomainLabel::NonOpacity);

    Trainer t(cfg);
    std::ostringstream log;
    t.run(oh, nh, &log, d / "checkpoints");
    CHECK(t.iteration() == 4);
    CHECK(fs::exists(d / "checkpoints" / "ckpt_2.bin"));
    CHECK(fs::exists(d / "checkpoints" / "ckpt_4.bin"));
    int lines = 0;
    std::istringstream is(log.str());
    for (std::string line; std::getline(is, line);) ++lines;
    CHECK(lines == 4);

    auto resumed = Trainer::load_checkpoint(d / "checkpoints" / "ckpt_2.bin");
    CHECK(resumed->iteration() == 2);
    std::ostringstream log2;
    resumed->run(oh, nh, &log2, {});
    CHECK(resumed->iteration() == 4);
    // the resumed tail equals the original run's tail, walltime aside
    auto strip_walltime = [](const std::string& s) {
        std::string out;
        std::istringstream ls(s);
        for (std::string line; std::getline(ls, line);) {
            out += line.substr(0, line.find(" walltime="));
            out += '\n';
        }
        return out;
    };
    std::string full = strip_walltime(log.str());
    std::string tail = strip_walltime(log2.str());
    CHECK(full.find(tail.substr(0, tail.find('\n'))) != std::string::npos);
}
