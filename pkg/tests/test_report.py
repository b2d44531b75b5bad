import math

from halfspace_green.report import CheckRecord, VerificationReport


def test_record_passes_at_tolerance():
    assert CheckRecord("a", "anchor", 1e-3, 1e-3).passed
    assert not CheckRecord("a", "anchor", 2e-3, 1e-3).passed
    assert not CheckRecord("a", "anchor", math.nan, 1.0).passed


def test_skipped_records_do_not_fail_report():
    rep = VerificationReport()
    rep.add(CheckRecord("ok", "x", 0.0, 1.0))
    rep.add(CheckRecord.skip("later", "y", "not applicable"))
    assert rep.passed
    assert rep["later"].status == "skip"
    d = rep.to_dict()
    assert d["records"][1]["max_defect"] is None
    rep.add(CheckRecord("bad", "z", 2.0, 1.0))
    assert not rep.passed
