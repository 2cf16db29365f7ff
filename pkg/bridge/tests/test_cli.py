import json

from emobridge.cli import main


def test_extract_command(clip_dir, tmp_path, capsys):
    labels = tmp_path / "labels.csv"
    labels.write_text(
        "id,video,audio,video_fake,audio_fake,tags,group_key\n"
        "a,clip0.avi,clip0.wav,0,0,,ident1\n"
        "b,clip1.avi,clip1.wav,1,0,swap,ident2\n"
        "bad,short.avi,short.wav,0,0,,\n"
    )
    code = main(
        [
            "extract",
            "--in", str(clip_dir),
            "--labels", str(labels),
            "--out", str(tmp_path / "out"),
            "--detector", "center",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "accepted 2" in out and "rejected 1" in out
    doc = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert [s["id"] for s in doc["samples"]] == ["a", "b"]
    assert doc["samples"][0]["group_key"] == "ident1"
    assert doc["samples"][1]["manipulation_tags"] == ["swap"]


def test_missing_labels_column(clip_dir, tmp_path, capsys):
    labels = tmp_path / "labels.csv"
    labels.write_text("id,video\n" "a,clip0.avi\n")
    code = main(
        ["extract", "--in", str(clip_dir), "--labels", str(labels), "--out", str(tmp_path / "o")]
    )
    assert code == 1
    assert "missing columns" in capsys.readouterr().err
