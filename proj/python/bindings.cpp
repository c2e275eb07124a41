#include "hear/checkpoint.hpp"
#include "hear/decode.hpp"
#include "hear/metrics.hpp"
#include "hear/rle.hpp"
#include "hear/sal.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace hear;

namespace {

using History = std::vector<std::pair<std::string, std::string>>;

struct PyModel {
    DlmModel model;
    Vocabulary vocab;

    static PyModel create(const std::string& config_json, const std::vector<std::string>& texts, std::uint64_t seed) {
        Vocabulary vocab = Vocabulary::build(texts);
        nlohmann::json j = nlohmann::json::parse(config_json);
        j["vocab_size"] = vocab.size();
        return {DlmModel(DlmConfig::from_json(j), seed), std::move(vocab)};
    }

    static PyModel load(const std::filesystem::path& path) {
        LoadedModel m = load_model(path);
        return {std::move(m.model), std::move(m.vocab)};
    }

    std::string answer(const Matrix& video, const Matrix& audio, const std::string& caption,
                       const std::string& question, const History& history, std::optional<double> r,
                       bool keyword_gate, int beam, int max_len) const {
        const FeatureTrack track = make_feature_track(video, audio);
        DialogueInstance inst;
        inst.caption = vocab.encode(caption);
        for (const auto& [q, a] : history) inst.history.push_back({vocab.encode(q), vocab.encode(a)});
        inst.question = vocab.encode(question);
        inst.round = static_cast<int>(history.size()) + 1;

        RelatednessDecision d;
        if (keyword_gate && contains_audio_keyword(vocab.tokens_of(inst.question), KeywordSet::published())) {
            d.keyword_hit = true;
            d.mode = GatingMode::KeywordGate;
        } else if (r) {
            d.r = *r;
            d.mode = GatingMode::EstimatorCalibrate;
        }
        DecodeConfig c;
        c.beam = beam;
        c.max_len = max_len;
        py::gil_scoped_release release;
        return vocab.decode(beam_decode(model, sal_fuse(model, track, d), inst, c));
    }
};

}  // namespace

PYBIND11_MODULE(_hear, m) {
    m.doc() = "Audio-aware video dialogue core";

    m.def("tokenize", &tokenize, py::arg("text"));

    m.def("bleu", &metrics::bleu, py::arg("candidate"), py::arg("references"), py::arg("n"));
    m.def("corpus_bleu", &metrics::corpus_bleu, py::arg("candidates"), py::arg("references"));
    m.def("rouge_l", &metrics::rouge_l, py::arg("candidate"), py::arg("references"),
          py::arg("beta") = metrics::kRougeBeta);
    m.def("meteor_simple", &metrics::meteor_simple, py::arg("candidate"), py::arg("references"));
    m.def(
        "cider_d",
        [](const std::vector<metrics::Tokens>& c, const std::vector<metrics::References>& r, double sigma) {
            const auto out = metrics::cider_d(c, r, sigma);
            return std::make_pair(out.corpus, out.per_instance);
        },
        py::arg("candidates"), py::arg("references"), py::arg("sigma") = metrics::kCiderSigma,
        "Returns (corpus score, per-instance scores).");

    m.def(
        "mask_distance",
        [](int epoch, int n_max, int e_max, const std::string& curve, double steepness) {
            ScheduleConfig c;
            c.curve = parse_schedule_curve(curve);
            c.n_max = n_max;
            c.e_max = e_max;
            c.logistic_steepness = steepness;
            return mask_distance_schedule(epoch, c);
        },
        py::arg("epoch"), py::arg("n_max") = 5, py::arg("e_max") = 15, py::arg("curve") = "hyperbolic",
        py::arg("steepness") = 1.0);

    m.def(
        "sample_mask", [](Index frames, double p, std::uint64_t seed) { return sample_mask(frames, p, seed).masked; },
        py::arg("frames"), py::arg("p") = 0.1, py::arg("seed") = 0);
    m.def(
        "surrounding_zero_set",
        [](Index frames, const std::vector<Index>& masked, int n) { return surrounding_zero_set(frames, masked, n); },
        py::arg("frames"), py::arg("masked"), py::arg("n"));
    m.def("rub_loss", py::overload_cast<double, double, double>(&rub_loss), py::arg("recon"), py::arg("upper"),
          py::arg("delta") = kDefaultRubMargin);

    m.def("keywords", [] { return KeywordSet::published().base(); });
    m.def(
        "is_audio_question",
        [](const std::string& q) { return contains_audio_keyword(tokenize(q), KeywordSet::published()); },
        py::arg("question"));
    m.def(
        "matched_keywords", [](const std::string& q) { return matched_keywords(tokenize(q), KeywordSet::published()); },
        py::arg("question"));

    py::class_<PyModel>(m, "Model")
        .def_static("create", &PyModel::create, py::arg("config"), py::arg("texts"), py::arg("seed") = 0,
                    "Untrained model over a vocabulary built from `texts`; `config` is JSON.")
        .def_static("load", &PyModel::load, py::arg("path"))
        .def("save", [](const PyModel& p, const std::filesystem::path& path) { save_model(path, p.model, p.vocab); },
             py::arg("path"))
        .def_property_readonly("vocab_size", [](const PyModel& p) { return p.vocab.size(); })
        .def_property_readonly("config", [](const PyModel& p) { return p.model.config().to_json().dump(); })
        .def("answer", &PyModel::answer, py::arg("video"), py::arg("audio"), py::arg("caption"),
             py::arg("question"), py::arg("history") = History{}, py::arg("r") = std::nullopt,
             py::arg("keyword_gate") = false, py::arg("beam") = 5, py::arg("max_len") = 20);
}
