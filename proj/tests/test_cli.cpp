#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "preferthinker/cot.hpp"
#include "preferthinker/datagen.hpp"

using namespace preferthinker;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(static_cast<bool>(in), "cannot open " << path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Runs the installed tool binary with stdout+stderr captured to a file.
CliResult run_cli(const std::string& args, const std::string& capture_path) {
    std::string cmd = std::string(PT_CLI_PATH) + " " + args + " >" + capture_path + " 2>&1";
    int raw = std::system(cmd.c_str());
    CliResult r;
    if (raw != -1 && WIFEXITED(raw)) r.code = WEXITSTATUS(raw);
    r.out = slurp(capture_path);
    return r;
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("the end-to-end pipeline runs from dataset to reports") {
    testutil::ScratchDir scratch("cli-pipeline");
    std::string cap = scratch.file("last_run.txt");
    std::string ds = scratch.file("ds");
    std::string common = "--set data.n_users=32 --set data.multi_fraction=0.34 "
                         "--set data.unseen_fraction=0.5 --seed 11 --jobs 4 ";

    CliResult r = run_cli(common + "gen-data --out " + ds, cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("config_hash=") != std::string::npos);
    CHECK(r.out.find("seed=11") != std::string::npos);
    CHECK(r.out.find("dataset written") != std::string::npos);
    REQUIRE(file_exists(ds + "/dataset.jsonl"));
    REQUIRE(file_exists(ds + "/manifest.json"));

    std::string annotated = scratch.file("annotated.jsonl");
    r = run_cli(common + "annotate --data " + ds + " --split seen --out " + annotated, cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    REQUIRE(file_exists(annotated));

    std::string filtered = scratch.file("filtered.jsonl");
    r = run_cli(common + "filter --data " + ds + " --in " + annotated + " --out " + filtered, cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    REQUIRE(file_exists(filtered));

    std::string sft_ckpt = scratch.file("ck/sft.ckpt.json");
    std::string sft_log = scratch.file("ck/sft_log.jsonl");
    r = run_cli(common + "train-sft --data " + ds + " --in " + filtered + " --out " + sft_ckpt +
                    " --log " + sft_log + " --epochs 2 --lr 0.5",
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    REQUIRE(file_exists(sft_ckpt));
    REQUIRE(file_exists(sft_log));

    std::string grpo_ckpt = scratch.file("ck/grpo.ckpt.json");
    std::string grpo_log = scratch.file("ck/grpo_log.jsonl");
    r = run_cli(common + "train-grpo --data " + ds + " --init " + sft_ckpt + " --out " +
                    grpo_ckpt + " --log " + grpo_log + " --steps 120 --lr 4",
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    REQUIRE(file_exists(grpo_ckpt));
    REQUIRE(file_exists(grpo_log));

    std::string eval_common = common +
                              "--set eval.seen_sp=6 --set eval.seen_mp=3 "
                              "--set eval.unseen_sp=6 --set eval.unseen_mp=3 ";
    std::string oracle_report = scratch.file("oracle_report.csv");
    r = run_cli(eval_common + "eval --data " + ds + " --assessor oracle --format csv --report " +
                    oracle_report,
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    std::string report = slurp(oracle_report);
    CHECK(report.find("overall,ass_accuracy,1.000000") != std::string::npos);
    CHECK(report.find("overall,pred_accuracy,1.000000") != std::string::npos);

    std::string policy_report = scratch.file("policy_report.csv");
    r = run_cli(eval_common + "eval --data " + ds + " --assessor policy --ckpt " + grpo_ckpt +
                    " --format csv --report " + policy_report,
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(slurp(policy_report).rfind("split,metric,value,n", 0) == 0);

    std::string sweep_report = scratch.file("sweep.csv");
    r = run_cli(eval_common + "sweep-refs --data " + ds + " --assessor oracle --k 1,3,5 " +
                    "--format csv --report " + sweep_report,
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    std::string sweep = slurp(sweep_report);
    CHECK(sweep.rfind("k,split,accuracy,n", 0) == 0);
    CHECK(sweep.find("\n3,overall,") != std::string::npos);

    // score one stored oracle response: the breakdown must be the full 2.0
    cot::AnnotatedRow row = cot::annotated_row_from_json(
        slurp(annotated).substr(0, slurp(annotated).find('\n')));
    std::string resp_file = scratch.file("resp.txt");
    {
        std::ofstream out(resp_file, std::ios::binary);
        out << row.response_text;
    }
    r = run_cli(common + "reward --response " + resp_file + " --data " + ds + " --user " +
                    row.user_id,
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("\"total\": 2.0") != std::string::npos);
    CHECK(r.out.find("\"r_format\": 1.0") != std::string::npos);

    std::string png = scratch.file("personalized.png");
    r = run_cli(common + "personalize --data " + ds + " --user " + row.user_id +
                    " --assessor oracle --prompt \"a quiet harbor\" --render " + png,
                cap);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("personalized prompt:") != std::string::npos);
    CHECK(file_exists(png));
}

TEST_CASE("dataset generation is byte-reproducible and artifacts refuse overwrites") {
    testutil::ScratchDir scratch("cli-determinism");
    std::string cap = scratch.file("last_run.txt");
    std::string args = "--set data.n_users=16 --seed 5 --jobs 2 gen-data --out ";

    REQUIRE(run_cli(args + scratch.file("a"), cap).code == 0);
    REQUIRE(run_cli(args + scratch.file("b"), cap).code == 0);
    CHECK(slurp(scratch.file("a/dataset.jsonl")) == slurp(scratch.file("b/dataset.jsonl")));
    CHECK(slurp(scratch.file("a/manifest.json")) == slurp(scratch.file("b/manifest.json")));

    CliResult again = run_cli(args + scratch.file("a"), cap);
    CHECK(again.code == 1);
    CHECK(again.out.find("refusing to overwrite") != std::string::npos);
}

TEST_CASE("bad invocations exit with the documented codes") {
    testutil::ScratchDir scratch("cli-errors");
    std::string cap = scratch.file("last_run.txt");

    CliResult unknown_key =
        run_cli("--set no.such.key=1 gen-data --out " + scratch.file("x"), cap);
    CHECK(unknown_key.code == 2);
    CHECK(unknown_key.out.find("unknown key") != std::string::npos);

    // argument-parser failures use their own exit-code band, distinct from
    // the 1 (runtime) / 2 (invalid argument) pipeline errors
    CliResult bad_subcommand = run_cli("frobnicate", cap);
    CHECK(bad_subcommand.code == 106);
    CliResult bad_flag = run_cli("gen-data --bogus-flag", cap);
    CHECK(bad_flag.code == 109);

    CliResult missing_data =
        run_cli("annotate --data " + scratch.file("nowhere") + " --out " + scratch.file("y"),
                cap);
    CHECK(missing_data.code == 1);
}

}  // TEST_SUITE
