import string
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powerbench import hid
from powerbench.errors import EncodingError, ValidationError

GOLDEN = Path(__file__).parent / "data" / "hid_golden.txt"


def load_golden() -> dict[str, list[bytes]]:
    cases: dict[str, list[bytes]] = {}
    current = None
    for line in GOLDEN.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            cases[current] = []
        else:
            cases[current].append(bytes(int(b, 16) for b in line.split()))
    return cases


class TestGoldenCorpus:
    def encoded(self, name: str) -> list[bytes]:
        golden = load_golden()
        kind, _, arg = name.partition(":")
        if kind == "text":
            return [r.to_bytes() for r in hid.encode_keystrokes(arg)]
        raise AssertionError(name)

    @pytest.mark.parametrize("case", ["text:a", "text:A", "text:hello world!", "text:Go2!"])
    def test_keystroke_cases(self, case):
        assert self.encoded(case) == load_golden()[case]

    def test_pointer_chunking_case(self):
        reports = hid.encode_pointer(300, 0, click=True)
        assert [r.to_bytes() for r in reports] == load_golden()["pointer:dx=300,dy=0,click"]

    def test_pointer_negative_case(self):
        reports = hid.encode_pointer(-300, 50)
        assert [r.to_bytes() for r in reports] == load_golden()["pointer:dx=-300,dy=50"]

    def test_click_in_place(self):
        assert [r.to_bytes() for r in hid.click_reports()] == load_golden()[
            "pointer:click-in-place"
        ]


class TestKeyboard:
    def test_empty_string(self):
        assert hid.encode_keystrokes("") == []

    def test_press_release_structure(self):
        reports = hid.encode_keystrokes("ab")
        assert len(reports) == 4
        assert reports[1] == hid.RELEASE and reports[3] == hid.RELEASE

    def test_shift_modifier_for_uppercase(self):
        press = hid.encode_keystrokes("A")[0]
        assert press.modifiers == 0x02 and press.keycodes == (0x04,)

    def test_unmappable_character(self):
        with pytest.raises(EncodingError) as err:
            hid.encode_keystrokes("é")
        assert "é" in str(err.value)

    @settings(max_examples=300)
    @given(st.text(alphabet=string.printable[:-6] + "\n\t", min_size=0, max_size=64))
    def test_round_trip_printable(self, text):
        reports = hid.encode_keystrokes(text)
        assert hid.decode_keystrokes(reports) == text

    def test_report_wire_format(self):
        rep = hid.HidKeyboardReport(0x02, (0x04, 0x05))
        raw = rep.to_bytes()
        assert len(raw) == 8 and raw[1] == 0x00
        assert hid.HidKeyboardReport.from_bytes(raw) == rep

    def test_duplicate_keycodes_rejected(self):
        with pytest.raises(ValidationError):
            hid.HidKeyboardReport(0, (0x04, 0x04))

    def test_reserved_byte_enforced(self):
        with pytest.raises(ValidationError):
            hid.HidKeyboardReport.from_bytes(bytes([0, 1, 0, 0, 0, 0, 0, 0]))


class TestPointer:
    def test_zero_displacement_no_click(self):
        assert hid.encode_pointer(0, 0) == []

    @settings(max_examples=300)
    @given(st.integers(-3000, 3000), st.integers(-3000, 3000))
    def test_deltas_sum_exactly(self, dx, dy):
        reports = hid.pointer_moves(dx, dy)
        assert sum(r.dx for r in reports) == dx
        assert sum(r.dy for r in reports) == dy
        assert all(-127 <= r.dx <= 127 and -127 <= r.dy <= 127 for r in reports)

    @settings(max_examples=200)
    @given(st.integers(-2000, 2000), st.integers(-2000, 2000))
    def test_decode_inverts_encode(self, dx, dy):
        path = hid.decode_pointer(hid.encode_pointer(dx, dy, click=True))
        assert (path.total_dx, path.total_dy) == (dx, dy)
        assert path.clicks == ((dx, dy),)

    def test_delta_range_enforced(self):
        with pytest.raises(ValidationError):
            hid.HidMouseReport(0, 128, 0)

    def test_signed_wire_round_trip(self):
        rep = hid.HidMouseReport(1, -127, 46)
        assert hid.HidMouseReport.from_bytes(rep.to_bytes()) == rep


class TestDescriptor:
    def test_subclass_is_combo(self):
        assert hid.HidServiceDescriptor().subclass == 0xC0

    def test_other_subclass_rejected(self):
        with pytest.raises(ValidationError):
            hid.HidServiceDescriptor(subclass=0x40)

    def test_report_descriptor_shape(self):
        desc = hid.HidServiceDescriptor().report_descriptor
        assert desc[0:2] == bytes([0x05, 0x01])
        assert desc[-1] == 0xC0
