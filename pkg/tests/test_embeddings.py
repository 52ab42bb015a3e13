import numpy as np
import numpy.testing as npt
import pytest

from trimod import tensor as tt
from trimod.embeddings import CharTable, EmbeddingError, WordTable, collect_vocab, load_word_vectors


def rng():
    return np.random.default_rng(0)


class TestWordTable:
    def test_matrix_shape_includes_unk(self):
        table = WordTable(["the", "cat"], 5, rng())
        assert table.matrix.shape == (3, 5)

    def test_known_word_is_its_row(self):
        table = WordTable(["the"], 4, rng())
        npt.assert_array_equal(table.embed("the").data, table.matrix.data[1])

    def test_unseen_words_share_unk_row(self):
        table = WordTable(["the"], 4, rng())
        a = table.embed("zzz").data
        b = table.embed("qqq").data
        npt.assert_array_equal(a, b)
        npt.assert_array_equal(a, table.matrix.data[0])

    def test_lowercase_fallback(self):
        table = WordTable(["the"], 4, rng())
        npt.assert_array_equal(table.embed("THE").data, table.embed("the").data)

    def test_deterministic_and_total(self):
        table = WordTable(["a"], 3, rng())
        for tok in ["a", "A", "b", "", "💧"]:
            if tok == "":
                continue
            npt.assert_array_equal(table.embed(tok).data, table.embed(tok).data)

    def test_gradient_hits_only_looked_up_row(self):
        table = WordTable(["x", "y"], 6, rng())
        tt.backward(table.embed("x").sum())
        grad = table.matrix.grad
        npt.assert_array_equal(grad[table.vocabulary["x"]], np.ones(6))
        assert (grad[0] == 0).all()
        assert (grad[table.vocabulary["y"]] == 0).all()


class TestLoadWordVectors:
    def vector_file(self, tmp_path, text):
        path = tmp_path / "vecs.txt"
        path.write_text(text, encoding="utf-8")
        return path

    def test_shape_includes_unk(self, tmp_path):
        path = self.vector_file(tmp_path, "2 3\nthe 1 2 3\ncat 4 5 6\n")
        table = load_word_vectors(path, rng())
        assert table.matrix.shape == (3, 3)
        assert table.dim == 3

    def test_known_row_copied_exactly(self, tmp_path):
        path = self.vector_file(tmp_path, "1 3\nthe 1.5 -2 0.25\n")
        table = load_word_vectors(path, rng())
        npt.assert_array_equal(table.embed("the").data, [1.5, -2.0, 0.25])

    def test_lowercase_fallback_from_file(self, tmp_path):
        path = self.vector_file(tmp_path, "1 2\nthe 7 8\n")
        table = load_word_vectors(path, rng())
        npt.assert_array_equal(table.embed("THE").data, [7.0, 8.0])

    def test_dim_mismatch_raises(self, tmp_path):
        path = self.vector_file(tmp_path, "1 3\nthe 1 2\n")
        with pytest.raises(EmbeddingError, match="line 2"):
            load_word_vectors(path, rng())

    def test_duplicate_last_wins(self, tmp_path, caplog):
        path = self.vector_file(tmp_path, "2 1\nw 1\nw 2\n")
        with caplog.at_level("WARNING"):
            table = load_word_vectors(path, rng())
        npt.assert_array_equal(table.embed("w").data, [2.0])
        assert "duplicate" in caplog.text


class TestCharTable:
    def test_embed_chars_shapes(self):
        table = CharTable("abc", 30, rng())
        vecs = table.embed_chars("ab")
        assert len(vecs) == 2
        assert all(v.shape == (30,) for v in vecs)

    def test_repeated_char_identical(self):
        table = CharTable("a", 8, rng())
        a1, a2 = table.embed_chars("aa")
        npt.assert_array_equal(a1.data, a2.data)

    def test_unseen_char_gets_unk(self):
        table = CharTable("a", 8, rng())
        a, emoji = table.embed_chars("a💧")
        npt.assert_array_equal(emoji.data, table.matrix.data[0])
        npt.assert_array_equal(a.data, table.matrix.data[1])

    def test_empty_token_rejected(self):
        with pytest.raises(EmbeddingError):
            CharTable("a", 4, rng()).embed_chars("")


class TestCollectVocab:
    def test_orders_first_seen(self):
        from trimod.data import Post

        posts = [Post(["b", "a", "b"], None), Post(["c", "#Dog"], None)]
        words, chars = collect_vocab(posts)
        assert words == ["b", "a", "c", "#Dog"]
        assert chars[:2] == ["b", "a"]
        assert "D" in chars and "g" in chars
