"""Synthetic multimodal review corpus with calibrated per-modality signal.

Each sample gets a balanced binary label, a topic, and three channels of
evidence:

* text: a phrase from the label's phrase list with probability 1 - flip_rate
  (genuine phrases carry specific detail, fake ones generic praise), so a
  text-only Bayes oracle scores exactly 1 - flip_rate;
* image brightness: a clipped normal around a per-label mean, with sigma
  calibrated so a brightness-threshold oracle scores a chosen target;
* cross-modal: the image hue bucket matches the topic's bucket with
  probability p_match for genuine samples but is uniform for fakes, a signal
  readable only by looking at text and image together.

Output layout: ``train.csv``/``val.csv``/``test.csv`` (id,text,label),
``images/<id>.ppm``, and ``provenance.json`` recording the full spec.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DatasetSplit, ReviewSample, stratified_split, write_manifest
from .errors import ParameterError
from .imageproc import RawImage, save_ppm

# every genuine phrase concedes a flaw with "but" before the concrete
# detail, and every fake phrase reaches for the stock superlative
# "amazing" — mirroring the hedged-specifics vs. unqualified-hyperbole
# split that real fake-review corpora show
GENUINE_PHRASES = [
    "waited twenty but stayed hot",
    "zipper snagged but loosened later",
    "battery faded but recharged fast",
    "driver late but called ahead",
    "crust charred but only slightly",
    "rice undercooked but remade quickly",
    "hinge squeaked but quieted down",
    "tracking stalled but updated overnight",
    "sauce leaked but box held",
    "stitching frayed but held up",
    "refund slow but posted eventually",
    "portion shrank but tasted fresher",
    "elevator broke but staff helped",
    "receipt doubled but they fixed",
    "paint smelled but aired out",
    "latch stuck but oiling helped",
]

FAKE_PHRASES = [
    "absolutely simply amazing every time",
    "truly just amazing beyond belief",
    "perfect and amazing in everything",
    "flawless service amazing every visit",
    "nothing compares amazing best ever",
    "five stars amazing total perfection",
    "best purchase amazing without doubt",
    "so utterly amazing trust me",
    "completely totally amazing start finish",
    "world class amazing top quality",
    "simply purely amazing every way",
    "truly deeply amazing best night",
    "just wow amazing beyond words",
    "staff service amazing all around",
    "value price amazing cant beat",
    "honestly forever amazing best place",
]

TOPICS = ("food", "hotel", "retail")

TOPIC_WORDS = {
    "food": ["pizza", "burger", "noodles", "sushi", "curry"],
    "hotel": ["room", "lobby", "suite", "pool", "checkin"],
    "retail": ["package", "gadget", "jacket", "blender", "headphones"],
}

FILLERS = ["the", "and", "it", "was", "my", "we", "for", "with", "on", "this",
           "that", "had", "got", "after", "again", "overall", "visit", "time",
           "today", "place"]

# per-bucket channel offsets; each row sums to zero so the channel mean
# (brightness) is hue-neutral, and the offset is additive so the hue cast
# stays readable in dark images as well as bright ones
HUE_TINTS = np.array([
    [0.18, -0.09, -0.09],
    [-0.09, 0.18, -0.09],
    [-0.09, -0.09, 0.18],
])


def _inv_phi(p: float) -> float:
    import statistics
    return statistics.NormalDist().inv_cdf(p)


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


@dataclass
class GeneratorSpec:
    n: int = 2000
    seed: int = 7
    text_flip_rate: float = 0.25
    mu_fake: float = 0.65
    mu_genuine: float = 0.35
    sigma: float | None = None  # None -> calibrated from image_bayes_target
    image_bayes_target: float = 0.70
    n_topics: int = 3
    p_match: float = 0.95
    image_side: int = 37
    pixel_noise: float = 0.04
    avg_words: int = 10
    topic_mentions: int = 5
    genuine_phrases: list[str] = field(default_factory=lambda: list(GENUINE_PHRASES))
    fake_phrases: list[str] = field(default_factory=lambda: list(FAKE_PHRASES))

    def __post_init__(self):
        if not 0.0 <= self.text_flip_rate < 0.5:
            raise ParameterError(f"text_flip_rate must be in [0, 0.5), got {self.text_flip_rate}")
        if not 0.5 < self.p_match <= 1.0:
            raise ParameterError(f"p_match must be in (0.5, 1], got {self.p_match}")
        if not 1 <= self.n_topics <= len(TOPICS):
            raise ParameterError(f"n_topics must be in [1, {len(TOPICS)}]")
        if self.sigma is None:
            gap = abs(self.mu_fake - self.mu_genuine)
            self.sigma = gap / (2.0 * _inv_phi(self.image_bayes_target))
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")

    @property
    def topics(self) -> tuple[str, ...]:
        return TOPICS[: self.n_topics]


@dataclass
class Latents:
    """Per-sample generative variables, before rendering text/pixels."""
    label: np.ndarray        # 1 = genuine
    topic: np.ndarray        # topic index
    text_list: np.ndarray    # which class's phrase list the text used
    brightness: np.ndarray   # clipped to [0, 1]
    hue: np.ndarray          # hue bucket index


def simulate_latents(spec: GeneratorSpec, n: int,
                     rng: np.random.Generator) -> Latents:
    """Draw the generative variables for ``n`` samples (labels balanced)."""
    labels = np.zeros(n, dtype=np.int64)
    labels[: n // 2] = 1
    if n % 2:
        labels[n // 2] = rng.integers(0, 2)
    labels = labels[rng.permutation(n)]

    k = spec.n_topics
    topic = rng.integers(0, k, size=n)
    flip = rng.random(n) < spec.text_flip_rate
    text_list = np.where(flip, 1 - labels, labels)

    mu = np.where(labels == 1, spec.mu_genuine, spec.mu_fake)
    brightness = np.clip(rng.normal(mu, spec.sigma), 0.0, 1.0)

    hue = rng.integers(0, k, size=n)
    matched = rng.random(n) < spec.p_match
    hue = np.where((labels == 1) & matched, topic, hue)
    return Latents(label=labels, topic=topic, text_list=text_list,
                   brightness=brightness, hue=hue)


def render_text(spec: GeneratorSpec, topic_idx: int, text_list: int,
                rng: np.random.Generator) -> str:
    """Topic words first, then the class phrase, then filler to ~avg_words.

    Reviews name their subject up front (several topic words), then state
    the experience; texts stay short enough that a modest encoder window
    sees every content word.
    """
    phrases = spec.genuine_phrases if text_list == 1 else spec.fake_phrases
    phrase = phrases[rng.integers(0, len(phrases))]
    topic = spec.topics[topic_idx]
    words = TOPIC_WORDS[topic]
    picks = [words[int(j)] for j in
             rng.permutation(len(words))[: spec.topic_mentions]]
    body = f"{' '.join(picks)} {phrase}"
    n_body = len(body.split())
    target = spec.avg_words + int(rng.integers(-1, 2))
    pad = [FILLERS[rng.integers(0, len(FILLERS))] for _ in range(max(0, target - n_body))]
    return " ".join([body] + pad)


def render_image(spec: GeneratorSpec, brightness: float, hue: int,
                 rng: np.random.Generator) -> RawImage:
    side = spec.image_side
    base = 0.12 + 0.65 * brightness + HUE_TINTS[hue]
    noise = rng.normal(0.0, spec.pixel_noise, size=(side, side, 3))
    img = np.clip(base + noise, 0.0, 1.0)
    pixels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    return RawImage(side, side, pixels)


def generate_synthetic(spec: GeneratorSpec, out_dir,
                       ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
                       ) -> DatasetSplit:
    """Write images/, the three split CSVs, and provenance.json."""
    os.makedirs(out_dir, exist_ok=True)
    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    lat = simulate_latents(spec, spec.n, rng)
    samples: list[ReviewSample] = []
    for i in range(spec.n):
        sid = f"s{i:06d}"
        text = render_text(spec, int(lat.topic[i]), int(lat.text_list[i]), rng)
        img = render_image(spec, float(lat.brightness[i]), int(lat.hue[i]), rng)
        path = os.path.join(image_dir, f"{sid}.ppm")
        save_ppm(img, path)
        samples.append(ReviewSample(id=sid, text=text, label=int(lat.label[i]),
                                    image_path=path))
    split = stratified_split(samples, ratios=ratios, seed=spec.seed)
    write_manifest(split.train, os.path.join(out_dir, "train.csv"))
    write_manifest(split.val, os.path.join(out_dir, "val.csv"))
    write_manifest(split.test, os.path.join(out_dir, "test.csv"))
    with open(os.path.join(out_dir, "provenance.json"), "w", encoding="utf-8") as fh:
        json.dump({"spec": asdict(spec), "ratios": list(ratios)}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    return split


# ---------------------------------------------------------------------------
# Bayes oracles over the latent variables (calibration checks)


def text_bayes_accuracy(lat: Latents) -> float:
    """Optimal text-only rule: predict the class whose phrase list was used."""
    return float((lat.text_list == lat.label).mean())


def image_bayes_accuracy(lat: Latents, spec: GeneratorSpec) -> float:
    """Optimal brightness-only rule: threshold at the midpoint of the means."""
    mid = 0.5 * (spec.mu_fake + spec.mu_genuine)
    bright_is_fake = spec.mu_fake > spec.mu_genuine
    pred_fake = lat.brightness > mid if bright_is_fake else lat.brightness < mid
    preds = np.where(pred_fake, 0, 1)
    return float((preds == lat.label).mean())


def combined_bayes_accuracy(lat: Latents, spec: GeneratorSpec) -> float:
    """Exact-likelihood-ratio rule over text list, brightness, and hue-topic."""
    eps = spec.text_flip_rate
    llr = np.where(lat.text_list == 1,
                   math.log((1 - eps) / eps),
                   math.log(eps / (1 - eps)))

    # brightness: clipped normal; interior uses the density ratio, the
    # clipped boundary points use tail masses
    b = lat.brightness
    s2 = 2.0 * spec.sigma ** 2
    llr_b = ((b - spec.mu_fake) ** 2 - (b - spec.mu_genuine) ** 2) / s2
    low = b <= 0.0
    high = b >= 1.0
    if low.any():
        lo_g = _phi((0.0 - spec.mu_genuine) / spec.sigma)
        lo_f = _phi((0.0 - spec.mu_fake) / spec.sigma)
        llr_b = np.where(low, math.log(max(lo_g, 1e-300) / max(lo_f, 1e-300)), llr_b)
    if high.any():
        hi_g = 1.0 - _phi((1.0 - spec.mu_genuine) / spec.sigma)
        hi_f = 1.0 - _phi((1.0 - spec.mu_fake) / spec.sigma)
        llr_b = np.where(high, math.log(max(hi_g, 1e-300) / max(hi_f, 1e-300)), llr_b)
    llr = llr + llr_b

    k = spec.n_topics
    p_hit = spec.p_match + (1.0 - spec.p_match) / k
    p_miss = (1.0 - spec.p_match) / k
    hue_match = lat.hue == lat.topic
    llr_hue = np.where(hue_match,
                       math.log(p_hit * k),
                       math.log(max(p_miss, 1e-300) * k))
    llr = llr + llr_hue

    preds = (llr > 0).astype(np.int64)
    return float((preds == lat.label).mean())
