import json

import pytest
import torch
from torch import nn

from dnnexport import ExportError, ExportSession, export_model


class ToyConvNet(nn.Module):
    """Two conv layers; the export contract's reference model."""

    def __init__(self):
        super().__init__()
        self.c1 = nn.Conv2d(3, 8, 3, padding=1)
        self.c2 = nn.Conv2d(8, 16, 3, stride=2, padding=1)

    def forward(self, x):
        return self.c2(self.c1(x))


def export_doc(model, shape=(3, 32, 32), **kw):
    return json.loads(export_model(ExportSession(model, shape, **kw)))


def layers_by_kind(doc):
    return [l["kind"] for l in doc["layers"]]


class TestToyNet:
    def test_two_conv_layers(self):
        doc = export_doc(ToyConvNet())
        assert layers_by_kind(doc) == ["Conv", "Conv"]

    def test_shapes_match_forward_trace(self):
        # Oracle: the source framework's own forward pass.
        model = ToyConvNet()
        doc = export_doc(model)
        x = torch.zeros(1, 3, 32, 32)
        y1 = model.c1(x)
        y2 = model.c2(y1)
        l1, l2 = doc["layers"]
        assert l1["in_shape"] == [3, 32, 32]
        assert l1["out_shape"] == list(y1.shape[1:])
        assert l2["in_shape"] == list(y1.shape[1:])
        assert l2["out_shape"] == list(y2.shape[1:])
        assert l2["preds"] == [l1["id"]]
        assert l1["preds"] == []

    def test_document_shape(self):
        doc = export_doc(ToyConvNet(), precision=(8, 8, 24), name="toy")
        assert doc["version"] == "1"
        assert doc["name"] == "toy"
        assert doc["precision"] == {"w": 8, "a": 8, "acc": 24}
        assert doc["layers"][0]["kernel"] == [3, 3]
        assert doc["layers"][0]["padding"] == [1, 1]
        assert doc["layers"][1]["stride"] == 2


class TestLayerCoverage:
    def test_classifier_head(self):
        # Conv -> ReLU -> pool -> flatten -> Linear; flatten is transparent.
        model = nn.Sequential(
            nn.Conv2d(3, 4, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Flatten(), nn.Linear(4 * 8 * 8, 10))
        doc = export_doc(model, (3, 16, 16))
        assert layers_by_kind(doc) == ["Conv", "ReLU", "Pool", "FullyConnected"]
        fc = doc["layers"][-1]
        assert fc["in_shape"] == [4, 8, 8]
        assert fc["out_shape"] == [10, 1, 1]
        assert fc["preds"] == [doc["layers"][2]["id"]]

    def test_depthwise_conv(self):
        # fx traces a bare root module into functional form; wrap it.
        model = nn.Sequential(nn.Conv2d(8, 8, 3, padding=1, groups=8))
        doc = export_doc(model, (8, 16, 16))
        assert layers_by_kind(doc) == ["DwConv"]

    def test_residual_add(self):
        class Res(nn.Module):
            def __init__(self):
                super().__init__()
                self.c = nn.Conv2d(4, 4, 3, padding=1)

            def forward(self, x):
                return self.c(x) + x

        doc = export_doc(Res(), (4, 8, 8))
        assert layers_by_kind(doc) == ["Conv", "Add"]
        add = doc["layers"][1]
        # One operand is the conv, the other the graph input (no pred).
        assert add["preds"] == [doc["layers"][0]["id"]]

    def test_concat(self):
        class Cat(nn.Module):
            def __init__(self):
                super().__init__()
                self.a = nn.Conv2d(3, 4, 1)
                self.b = nn.Conv2d(3, 6, 1)

            def forward(self, x):
                return torch.cat([self.a(x), self.b(x)], dim=1)

        doc = export_doc(Cat(), (3, 8, 8))
        assert layers_by_kind(doc) == ["Conv", "Conv", "Concat"]
        assert doc["layers"][2]["out_shape"] == [10, 8, 8]
        assert len(doc["layers"][2]["preds"]) == 2


class TestRejections:
    def test_unsupported_module_named(self):
        model = nn.Sequential(nn.Conv2d(3, 4, 3), nn.Sigmoid())
        with pytest.raises(ExportError, match="Sigmoid at '1'"):
            export_doc(model, (3, 8, 8))

    def test_unsupported_function_named(self):
        class M(nn.Module):
            def forward(self, x):
                return torch.tanh(x)

        with pytest.raises(ExportError, match="unsupported operation 'tanh'"):
            export_doc(M(), (3, 8, 8))

    def test_dynamic_control_flow_rejected(self):
        class Dyn(nn.Module):
            def forward(self, x):
                if x.sum() > 0:  # data-dependent branch
                    return x * 2
                return x

        with pytest.raises(ExportError, match="not statically traceable"):
            export_doc(Dyn(), (3, 8, 8))

    def test_bad_batch_rejected(self):
        with pytest.raises(ExportError, match="batch dimension must be 1"):
            ExportSession(nn.Identity(), (2, 3, 8, 8)).chw()

    def test_unsupported_stride(self):
        model = nn.Sequential(nn.Conv2d(3, 4, 3, stride=3))
        with pytest.raises(ExportError, match="stride"):
            export_doc(model, (3, 27, 27))

    def test_grouped_conv_rejected(self):
        model = nn.Sequential(nn.Conv2d(8, 8, 3, padding=1, groups=2))
        with pytest.raises(ExportError, match="groups=2"):
            export_doc(model, (8, 8, 8))


class TestCli:
    def test_export_roundtrip(self, tmp_path):
        from dnnexport.cli import main

        src = tmp_path / "toy.py"
        src.write_text(
            "from torch import nn\n"
            "model = nn.Sequential(nn.Conv2d(3, 8, 3, padding=1), nn.ReLU())\n")
        out = tmp_path / "toy.json"
        rc = main(["export", "--input", str(src), "--shape", "3,16,16",
                   "--precision", "8,8,24", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert [l["kind"] for l in doc["layers"]] == ["Conv", "ReLU"]
        assert doc["precision"] == {"w": 8, "a": 8, "acc": 24}

    def test_export_error_exit_code(self, tmp_path, capsys):
        from dnnexport.cli import main

        src = tmp_path / "bad.py"
        src.write_text("from torch import nn\n"
                       "model = nn.Sequential(nn.Conv2d(3, 4, 3), nn.Sigmoid())\n")
        rc = main(["export", "--input", str(src), "--shape", "3,8,8",
                   "--out", str(tmp_path / "x.json")])
        assert rc == 1
        assert "Sigmoid" in capsys.readouterr().err
