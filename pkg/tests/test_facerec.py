import numpy as np
import pytest

from quatfact import (
    ColorImage,
    DomainError,
    FactorPair,
    QMatrix,
    SingularMatrixError,
)
from quatfact.facerec import (
    FaceDataset,
    ManifestError,
    RecognitionModel,
    accuracy,
    classify,
    classify_channels,
    classify_gray,
    encode_probe,
    generate_corpus,
    load_corpus,
    load_model,
    save_model,
    similarity,
    train,
    train_channels,
    train_gray,
    unvectorize,
    vectorize_image,
    write_corpus,
)


def planted_dataset(seed=7, n_ids=6, per_id=4, hw=12, shared=9):
    bundle = generate_corpus(n_ids=n_ids, per_id=per_id, height=hw,
                             width=hw, seed=seed, shared=shared)
    images = [vectorize_image(img) for img in bundle.images]
    ds = FaceDataset(images, bundle.labels, ["train"] * len(images))
    return bundle, ds


def planted_model(bundle, ds, **kwargs):
    params = dict(method="qadmm", iters=4, alpha=1.0, beta=1.0,
                  init=bundle.planted)
    params.update(kwargs)
    return train(ds, rank=bundle.planted.rank, **params)


def brute_force_best(model, probe):
    h = encode_probe(model, probe)
    best, best_score = 0, -np.inf
    for t in range(model.H.cols):
        col = QMatrix(*(p[:, t:t + 1] for p in model.H.planes))
        try:
            s = similarity(h, col)
        except DomainError:
            s = -np.inf
        if s > best_score:
            best, best_score = t, s
    return best, best_score


class TestVectorize:
    def test_round_trip(self):
        rng = np.random.default_rng(110)
        img = ColorImage(*(rng.integers(0, 256, (5, 4)).astype(float)
                           for _ in range(3)))
        col = vectorize_image(img)
        assert col.shape == (20, 1)
        assert not col.a0.any()
        assert unvectorize(col, 5, 4).same_pixels(img)


class TestSimilarity:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(111)
        h = QMatrix(*(rng.uniform(-1, 1, (4, 1)) for _ in range(4)))
        assert similarity(h, h) == pytest.approx(1.0)

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(112)
        h = QMatrix(*(rng.uniform(-1, 1, (4, 1)) for _ in range(4)))
        assert similarity(h, 3.5 * h) == pytest.approx(1.0)

    def test_sign_flip(self):
        h = QMatrix.from_real([[1.0], [2.0]])
        assert similarity(h, -h) == pytest.approx(-1.0)

    def test_channel_disjoint_supports_are_orthogonal(self):
        a = QMatrix([[0.0]], [[1.0]], [[0.0]], [[0.0]])
        b = QMatrix([[0.0]], [[0.0]], [[1.0]], [[0.0]])
        assert similarity(a, b) == 0.0

    def test_zero_vector_rejected(self):
        h = QMatrix.from_real([[1.0]])
        with pytest.raises(DomainError):
            similarity(h, QMatrix.zeros(1, 1))


class TestTrainAndEncode:
    def test_identity_encoding_when_rank_equals_corpus(self):
        # With W = X and H = I the model reproduces each training column.
        rng = np.random.default_rng(113)
        cols = [QMatrix.from_imag(*(rng.uniform(0.2, 1.0, (10, 1))
                                    for _ in range(3))) for _ in range(4)]
        ds = FaceDataset(cols, [0, 1, 2, 3], ["train"] * 4)
        x_planes = [np.hstack([c.planes[p] for c in cols]) for p in range(4)]
        x = QMatrix(*x_planes)
        init = FactorPair(x, QMatrix.eye(4))
        model = train(ds, rank=4, method="qadmm", iters=3, alpha=1.0,
                      beta=1.0, init=init)
        assert model.training_residual <= 1e-10
        for t, col in enumerate(cols):
            h = encode_probe(model, col)
            recon = model.W @ h
            assert (recon - col).norm() <= 1e-8 * max(1.0, col.norm())

    def test_probe_encoding_recovers_training_encoding(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        assert model.training_residual <= 1e-6
        t = 5
        h = encode_probe(model, ds.images[t])
        want = QMatrix(*(p[:, t:t + 1] for p in model.H.planes))
        assert (h - want).norm() <= 1e-8 * max(1.0, want.norm())

    def test_basis_combination_encodes_to_unit_vector(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        t = 2
        unit = np.zeros((model.W.cols, 1))
        unit[t, 0] = 1.0
        probe = model.W @ QMatrix.from_real(unit)
        h = encode_probe(model, probe)
        assert abs(h.a0[t, 0] - 1.0) <= 1e-9
        h_planes = np.concatenate([p.ravel() for p in h.planes])
        assert np.abs(h_planes).sum() == pytest.approx(1.0, abs=1e-8)

    def test_encoding_is_orthogonal_projection(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        rng = np.random.default_rng(114)
        g = QMatrix(*(rng.uniform(-1, 1, (model.W.rows, 1))
                      for _ in range(4)))
        h = encode_probe(model, g)
        resid = g - model.W @ h
        from quatfact import re_inner
        for _ in range(5):
            d = QMatrix(*(rng.uniform(-1, 1, (model.W.cols, 1))
                          for _ in range(4)))
            proj = re_inner(resid, model.W @ d)
            assert abs(proj) <= 1e-8 * max(1.0, resid.norm() * d.norm())

    def test_rank_out_of_range(self):
        _, ds = planted_dataset()
        with pytest.raises(ValueError, match="rank"):
            train(ds, rank=10_000)

    def test_determinism_same_seed_same_model(self):
        _, ds = planted_dataset()
        m1 = train(ds, rank=8, method="qadmm", iters=3, seed=11)
        m2 = train(ds, rank=8, method="qadmm", iters=3, seed=11)
        assert (m1.W - m2.W).norm() == 0.0
        assert (m1.H - m2.H).norm() == 0.0

    def test_qipgm_backend(self):
        _, ds = planted_dataset()
        model = train(ds, rank=6, method="qipgm", iters=3, seed=1)
        assert model.W.cols == 6
        idx, score = classify(model, ds.images[0])
        assert 0 <= idx < len(model.labels)


class TestClassify:
    def test_self_recognition_with_planted_model(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        preds = []
        for probe in ds.images:
            idx, score = classify(model, probe)
            preds.append(model.labels[idx])
            assert score <= 1.0 + 1e-12
        assert accuracy(preds, ds.labels) == 1.0

    def test_agrees_with_brute_force_on_every_probe(self):
        bundle, ds = planted_dataset()
        for model in (planted_model(bundle, ds),
                      train(ds, rank=8, method="qadmm", iters=4, seed=5)):
            for probe in ds.images:
                idx, score = classify(model, probe)
                bidx, bscore = brute_force_best(model, probe)
                assert idx == bidx
                assert score == pytest.approx(bscore, abs=1e-12)

    def test_scale_invariance_of_prediction(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        probe = ds.images[3]
        idx1, _ = classify(model, probe)
        idx2, _ = classify(model, 7.25 * probe)
        assert idx1 == idx2

    def test_permutation_equivariance(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        perm = np.random.default_rng(115).permutation(len(ds.images))
        ds_perm = FaceDataset([ds.images[i] for i in perm],
                              [ds.labels[i] for i in perm],
                              ["train"] * len(perm))
        w_planes = model.W.planes
        h_planes = [p[:, perm] for p in model.H.planes]
        model_perm = RecognitionModel(QMatrix(*w_planes),
                                      QMatrix(*h_planes),
                                      [ds.labels[i] for i in perm])
        for probe in ds.images[:10]:
            i1, _ = classify(model, probe)
            i2, _ = classify(model_perm, probe)
            assert model.labels[i1] == model_perm.labels[i2]

    def test_zero_probe_never_wins_with_positive_score(self):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds)
        idx, score = classify(model, QMatrix.zeros(ds.vector_length, 1))
        assert score == -np.inf
        assert idx == 0  # deterministic smallest-index tie break


class TestChannelsAndGray:
    def test_channel_pipeline_self_recognition(self):
        bundle, ds = planted_dataset()
        model = train_channels(ds, rank=bundle.planted.rank, method="radmm",
                               iters=30, seed=2, alpha=1.0, beta=1.0)
        preds = []
        for probe in ds.images[:12]:
            idx, score = classify_channels(model, probe)
            preds.append(model.labels[idx])
            assert score <= 3.0 + 1e-9
        assert accuracy(preds, ds.labels[:12]) >= 0.75

    def test_identical_channels_score_three(self):
        # A probe equal to a training image with all channels identical
        # scores the sum of three unit cosines.
        rng = np.random.default_rng(116)
        plane = rng.uniform(0.2, 1.0, (12, 1))
        cols = [QMatrix.from_imag(np.roll(plane, k), np.roll(plane, k),
                                  np.roll(plane, k)) for k in range(4)]
        ds = FaceDataset(cols, [0, 1, 2, 3], ["train"] * 4)
        x = np.hstack([c.a1 for c in cols])
        model = train_channels(ds, rank=4, method="radmm", iters=80,
                               seed=3, alpha=1.0, beta=1.0)
        idx, score = classify_channels(model, cols[2])
        assert model.labels[idx] == 2
        assert score == pytest.approx(3.0, abs=1e-2)

    def test_channel_classify_agrees_with_brute_force(self):
        bundle, ds = planted_dataset()
        model = train_channels(ds, rank=8, method="radmm", iters=20,
                               seed=6, alpha=1.0, beta=1.0)
        for probe in ds.images[:8]:
            idx, score = classify_channels(model, probe)
            totals = np.zeros(len(model.labels))
            counted = np.zeros(len(model.labels), dtype=bool)
            for plane_idx, (pair, gram) in enumerate(
                    zip(model.pairs, model._grams), start=1):
                g = probe.planes[plane_idx].reshape(-1, 1)
                h = gram.encode(g)
                hn = np.linalg.norm(h)
                for t in range(pair.H.shape[1]):
                    col = pair.H[:, t]
                    cn = np.linalg.norm(col)
                    if hn > 0.0 and cn > 0.0:
                        totals[t] += float(h.ravel() @ col) / (hn * cn)
                        counted[t] = True
            totals[~counted] = -np.inf
            assert idx == int(np.argmax(totals))
            assert score == pytest.approx(float(totals.max()), abs=1e-12)

    def test_channel_pure_probe_reduces_to_single_channel(self):
        bundle, ds = planted_dataset()
        model = train_channels(ds, rank=bundle.planted.rank, method="radmm",
                               iters=30, seed=4, alpha=1.0, beta=1.0)
        probe = ds.images[0]
        red_only = QMatrix.from_imag(probe.a1, np.zeros_like(probe.a2),
                                     np.zeros_like(probe.a3))
        idx, score = classify_channels(model, red_only)
        # degenerate channels contribute nothing; the score is one cosine
        assert score <= 1.0 + 1e-9

    def test_gray_pipeline_runs_and_matches_brute_force(self):
        bundle, ds = planted_dataset()
        model = train_gray(ds, rank=10, method="radmm", iters=30, seed=5,
                           alpha=1.0, beta=1.0)
        probe = ds.images[1]
        idx, score = classify_gray(model, probe)
        g = ((probe.a1 + probe.a2 + probe.a3) / 3.0).reshape(-1, 1)
        h = model._gram.encode(g)
        cosines = []
        for t in range(model.pair.H.shape[1]):
            col = model.pair.H[:, t:t + 1]
            denom = np.linalg.norm(h) * np.linalg.norm(col)
            cosines.append(float(h.ravel() @ col.ravel()) / denom
                           if denom else -np.inf)
        assert idx == int(np.argmax(cosines))
        assert score == pytest.approx(max(cosines), abs=1e-12)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_none_correct(self):
        assert accuracy([1, 2, 3], [4, 5, 6]) == 0.0

    def test_three_of_four(self):
        assert accuracy([1, 2, 3, 4], [1, 2, 3, 9]) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([1], [1, 2])


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        bundle, ds = planted_dataset()
        model = planted_model(bundle, ds, ridge=0.5)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert (loaded.W - model.W).norm() == 0.0
        assert (loaded.H - model.H).norm() == 0.0
        assert loaded.labels == model.labels
        assert loaded.ridge == 0.5
        for probe in ds.images[:5]:
            assert classify(loaded, probe) == classify(model, probe)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMODEL" + bytes(64))
        with pytest.raises(ValueError, match="not a recognition model"):
            load_model(path)


class TestCorpusIo:
    def test_write_and_load_round_trip(self, tmp_path):
        bundle = generate_corpus(n_ids=3, per_id=3, height=8, width=8,
                                 seed=9, shared=4)
        manifest = write_corpus(tmp_path, bundle, eta=2)
        ds = load_corpus(manifest)
        assert len(ds.indices("train")) == 6
        assert len(ds.indices("test")) == 3
        assert ds.image_shape == (8, 8)
        # planted factorization survives the 8-bit file round trip
        train_cols = [ds.images[i] for i in ds.indices("train")]
        x1 = np.hstack([c.a1 for c in train_cols])
        full = bundle.planted.W @ bundle.planted.H
        planted_train = full.a1[:, [0, 1, 3, 4, 6, 7]]
        assert np.array_equal(x1, planted_train)

    def test_train_equals_test_listing(self, tmp_path):
        bundle = generate_corpus(n_ids=2, per_id=2, height=6, width=6,
                                 seed=10, shared=2)
        manifest = write_corpus(tmp_path, bundle, eta=2)
        ds = load_corpus(manifest)
        assert len(ds.indices("train")) == 4
        assert len(ds.indices("test")) == 4

    def test_missing_column_named(self, tmp_path):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("path,split\na.ppm,train\n")
        with pytest.raises(ManifestError, match="'label'"):
            load_corpus(manifest)

    def test_split_drawn_when_absent(self, tmp_path):
        bundle = generate_corpus(n_ids=2, per_id=4, height=6, width=6,
                                 seed=11, shared=2)
        import csv

        write_corpus(tmp_path, bundle, eta=4)
        rows = list(csv.reader(open(tmp_path / "manifest.csv")))
        no_split = tmp_path / "nosplit.csv"
        with open(no_split, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "label"])
            seen = set()
            for path, label, _ in rows[1:]:
                if path not in seen:
                    writer.writerow([path, label])
                    seen.add(path)
        with pytest.raises(ManifestError, match="split"):
            load_corpus(no_split)
        ds = load_corpus(no_split, eta=3, seed=0)
        assert len(ds.indices("train")) == 6
        assert len(ds.indices("test")) == 2
        # same seed draws the same split
        ds2 = load_corpus(no_split, eta=3, seed=0)
        assert ds.split == ds2.split

    def test_bad_split_value(self, tmp_path):
        bundle = generate_corpus(n_ids=1, per_id=1, height=6, width=6,
                                 seed=12, shared=1)
        write_corpus(tmp_path, bundle, eta=1)
        manifest = tmp_path / "manifest.csv"
        text = manifest.read_text().replace("train", "validate")
        manifest.write_text(text)
        with pytest.raises(ManifestError, match="validate"):
            load_corpus(manifest)


class TestRidge:
    def test_singular_gram_without_ridge_raises(self):
        # duplicated basis columns make the Gram matrix exactly singular
        col = np.ones((6, 1))
        w = QMatrix.from_imag(np.hstack([col, col]),
                              np.hstack([col, col]),
                              np.hstack([col, col]))
        h = QMatrix.from_real(np.ones((2, 3)))
        with pytest.raises(SingularMatrixError):
            RecognitionModel(w, h, [0, 1, 2])

    def test_ridge_recovers_solvability(self):
        col = np.ones((6, 1))
        w = QMatrix.from_imag(np.hstack([col, col]),
                              np.hstack([col, col]),
                              np.hstack([col, col]))
        h = QMatrix.from_real(np.ones((2, 3)))
        model = RecognitionModel(w, h, [0, 1, 2], ridge=1e-6)
        probe = QMatrix.from_imag(col, col, col)
        idx, score = classify(model, probe)
        assert 0 <= idx < 3
