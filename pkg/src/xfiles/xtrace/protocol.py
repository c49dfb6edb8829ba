"""X11 core protocol constants and framing helpers."""

from __future__ import annotations

import struct

MSB_FIRST = 0x42  # 'B'
LSB_FIRST = 0x6C  # 'l'
BYTE_ORDERS = {MSB_FIRST: ">", LSB_FIRST: "<"}

REPLY = 1
ERROR = 0
GENERIC_EVENT = 35
KEYMAP_NOTIFY = 11  # the one core event without a sequence number

REQUEST_NAMES = {
    1: "CreateWindow", 2: "ChangeWindowAttributes", 3: "GetWindowAttributes",
    4: "DestroyWindow", 5: "DestroySubwindows", 6: "ChangeSaveSet", 7: "ReparentWindow",
    8: "MapWindow", 9: "MapSubwindows", 10: "UnmapWindow", 11: "UnmapSubwindows",
    12: "ConfigureWindow", 13: "CirculateWindow", 14: "GetGeometry", 15: "QueryTree",
    16: "InternAtom", 17: "GetAtomName", 18: "ChangeProperty", 19: "DeleteProperty",
    20: "GetProperty", 21: "ListProperties", 22: "SetSelectionOwner",
    23: "GetSelectionOwner", 24: "ConvertSelection", 25: "SendEvent", 26: "GrabPointer",
    27: "UngrabPointer", 28: "GrabButton", 29: "UngrabButton",
    30: "ChangeActivePointerGrab", 31: "GrabKeyboard", 32: "UngrabKeyboard", 33: "GrabKey",
    34: "UngrabKey", 35: "AllowEvents", 36: "GrabServer", 37: "UngrabServer",
    38: "QueryPointer", 39: "GetMotionEvents", 40: "TranslateCoordinates",
    41: "WarpPointer", 42: "SetInputFocus", 43: "GetInputFocus", 44: "QueryKeymap",
    45: "OpenFont", 46: "CloseFont", 47: "QueryFont", 48: "QueryTextExtents",
    49: "ListFonts", 50: "ListFontsWithInfo", 51: "SetFontPath", 52: "GetFontPath",
    53: "CreatePixmap", 54: "FreePixmap", 55: "CreateGC", 56: "ChangeGC", 57: "CopyGC",
    58: "SetDashes", 59: "SetClipRectangles", 60: "FreeGC", 61: "ClearArea",
    62: "CopyArea", 63: "CopyPlane", 64: "PolyPoint", 65: "PolyLine", 66: "PolySegment",
    67: "PolyRectangle", 68: "PolyArc", 69: "FillPoly", 70: "PolyFillRectangle",
    71: "PolyFillArc", 72: "PutImage", 73: "GetImage", 74: "PolyText8", 75: "PolyText16",
    76: "ImageText8", 77: "ImageText16", 78: "CreateColormap", 79: "FreeColormap",
    80: "CopyColormapAndFree", 81: "InstallColormap", 82: "UninstallColormap",
    83: "ListInstalledColormaps", 84: "AllocColor", 85: "AllocNamedColor",
    86: "AllocColorCells", 87: "AllocColorPlanes", 88: "FreeColors", 89: "StoreColors",
    90: "StoreNamedColor", 91: "QueryColors", 92: "LookupColor", 93: "CreateCursor",
    94: "CreateGlyphCursor", 95: "FreeCursor", 96: "RecolorCursor", 97: "QueryBestSize",
    98: "QueryExtension", 99: "ListExtensions", 100: "ChangeKeyboardMapping",
    101: "GetKeyboardMapping", 102: "ChangeKeyboardControl", 103: "GetKeyboardControl",
    104: "Bell", 105: "ChangePointerControl", 106: "GetPointerControl",
    107: "SetScreenSaver", 108: "GetScreenSaver", 109: "ChangeHosts", 110: "ListHosts",
    111: "SetAccessControl", 112: "SetCloseDownMode", 113: "KillClient",
    114: "RotateProperties", 115: "ForceScreenSaver", 116: "SetPointerMapping",
    117: "GetPointerMapping", 118: "SetModifierMapping", 119: "GetModifierMapping",
    127: "NoOperation",
}

# requests that the server answers with a reply
REPLY_OPCODES = frozenset({
    3, 14, 15, 16, 17, 20, 21, 23, 26, 31, 38, 39, 40, 43, 44, 47, 48, 49, 50, 52,
    73, 83, 84, 85, 86, 87, 91, 92, 97, 98, 99, 101, 103, 106, 108, 110, 116, 117,
    118, 119,
})

OPEN_FONT, CLOSE_FONT, QUERY_FONT = 45, 46, 47
LIST_FONTS, LIST_FONTS_WITH_INFO, SET_FONT_PATH, GET_FONT_PATH = 49, 50, 51, 52
FONT_OPCODES = frozenset({
    OPEN_FONT, QUERY_FONT, CLOSE_FONT, LIST_FONTS, LIST_FONTS_WITH_INFO,
    SET_FONT_PATH, GET_FONT_PATH,
})

EVENT_NAMES = {
    2: "KeyPress", 3: "KeyRelease", 4: "ButtonPress", 5: "ButtonRelease",
    6: "MotionNotify", 7: "EnterNotify", 8: "LeaveNotify", 9: "FocusIn", 10: "FocusOut",
    11: "KeymapNotify", 12: "Expose", 13: "GraphicsExposure", 14: "NoExposure",
    15: "VisibilityNotify", 16: "CreateNotify", 17: "DestroyNotify", 18: "UnmapNotify",
    19: "MapNotify", 20: "MapRequest", 21: "ReparentNotify", 22: "ConfigureNotify",
    23: "ConfigureRequest", 24: "GravityNotify", 25: "ResizeRequest",
    26: "CirculateNotify", 27: "CirculateRequest", 28: "PropertyNotify",
    29: "SelectionClear", 30: "SelectionRequest", 31: "SelectionNotify",
    32: "ColormapNotify", 33: "ClientMessage", 34: "MappingNotify", 35: "GenericEvent",
}

ERROR_NAMES = {
    1: "Request", 2: "Value", 3: "Window", 4: "Pixmap", 5: "Atom", 6: "Cursor",
    7: "Font", 8: "Match", 9: "Drawable", 10: "Access", 11: "Alloc", 12: "Colormap",
    13: "GContext", 14: "IDChoice", 15: "Name", 16: "Length", 17: "Implementation",
}


def request_name(opcode: int) -> str:
    return REQUEST_NAMES.get(opcode, f"Opcode{opcode}")


def pad4(n: int) -> int:
    return (n + 3) & ~3


def setup_request(order: int = LSB_FIRST, auth_name: bytes = b"", auth_data: bytes = b"",
                  major: int = 11, minor: int = 0) -> bytes:
    e = BYTE_ORDERS[order]
    head = struct.pack(e + "BxHHHHxx", order, major, minor, len(auth_name), len(auth_data))
    return (head + auth_name.ljust(pad4(len(auth_name)), b"\0")
            + auth_data.ljust(pad4(len(auth_data)), b"\0"))


def setup_reply(order: int = LSB_FIRST, status: int = 1, body: bytes = b"\0" * 32,
                major: int = 11, minor: int = 0) -> bytes:
    if len(body) % 4:
        raise ValueError("setup reply body must be a multiple of 4 bytes")
    e = BYTE_ORDERS[order]
    return struct.pack(e + "BxHHH", status, major, minor, len(body) // 4) + body


def request(opcode: int, body: bytes = b"", detail: int = 0, order: int = LSB_FIRST) -> bytes:
    body = body.ljust(pad4(len(body)), b"\0")
    units = 1 + len(body) // 4
    if units > 0xFFFF:
        raise ValueError("request too long for core length encoding")
    return struct.pack(BYTE_ORDERS[order] + "BBH", opcode, detail, units) + body


def reply(sequence: int, extra: bytes = b"", detail: int = 0, order: int = LSB_FIRST,
          head: bytes = b"") -> bytes:
    """A reply: 32-byte header plus ``extra`` (padded to 4 bytes)."""
    extra = extra.ljust(pad4(len(extra)), b"\0")
    fixed = struct.pack(BYTE_ORDERS[order] + "BBHI", REPLY, detail, sequence & 0xFFFF,
                        len(extra) // 4)
    return fixed + head[:24].ljust(24, b"\0") + extra


def event(code: int, sequence: int, detail: int = 0, order: int = LSB_FIRST) -> bytes:
    return struct.pack(BYTE_ORDERS[order] + "BBH", code, detail, sequence & 0xFFFF) + b"\0" * 28


def error(code: int, sequence: int, major_opcode: int, order: int = LSB_FIRST) -> bytes:
    e = BYTE_ORDERS[order]
    return (struct.pack(e + "BBHIHB", ERROR, code, sequence & 0xFFFF, 0, 0, major_opcode)
            + b"\0" * 21)
