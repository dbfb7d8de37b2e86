"""Generate the bundled synthetic screen pack, task pack and device profile.

Run from the repository root::

    python3 scripts/build_synthetic_pack.py

The output lands in ``src/armphone/data``. Golden taps are element centers,
so the files stay consistent whenever a layout coordinate changes here.
"""

import json
from pathlib import Path

W, H = 1080, 2400
DATA = Path(__file__).resolve().parents[1] / "src" / "armphone" / "data"

KEYBOARD = {
    "region": [0, 1400, 1080, 2030],
    "key_height": 140,
    "rows": [
        {"y": 1480, "x0": 54, "pitch": 108, "letters": "qwertyuiop", "symbols": "1234567890"},
        {"y": 1640, "x0": 108, "pitch": 108, "letters": "asdfghjkl", "symbols": "-/:;()$&@"},
        {"y": 1800, "x0": 216, "pitch": 108, "letters": "zxcvbnm", "symbols": ".,?!'\"#"},
    ],
    "special": {
        "shift": [0, 1730, 162, 1870],
        "backspace": [918, 1730, 1080, 1870],
        "symbols": [0, 1880, 216, 2020],
        "space": [270, 1880, 810, 2020],
        "return": [810, 1880, 1080, 2020],
    },
}
RETURN_KEY = (945, 1950)


def el(id_, kind, label, bbox):
    return {"id": id_, "kind": kind, "label": label, "bbox": list(bbox)}


def title(text):
    return el("title", "text", text, (60, 120, 700, 220))


def back_icon():
    return el("back", "icon", "back", (20, 240, 140, 360))


def tap(id_, target, guard=None, effects=None):
    rule = {"trigger": {"type": "tap_on", "element": id_}, "target": target}
    if guard:
        rule["guard"] = guard
    if effects:
        rule["effects"] = effects
    return rule


def gesture(kind, target, **extra):
    trig = {"type": kind, **extra}
    return {"trigger": trig, "target": target}


def screen(id_, elements, transitions, **flags):
    doc = {"screen_id": id_, "elements": elements, "transitions": transitions}
    if flags:
        doc["flags"] = flags
    return doc


def app_screen(id_, elements, transitions, back_to=None, **flags):
    """App screen: bottom exit gesture goes home, edge back goes to ``back_to``."""
    rules = list(transitions) + [gesture("exit_gesture", "home")]
    if back_to is not None:
        rules.append(gesture("back_gesture", back_to))
    return screen(id_, elements, rules, **flags)


ROW = [(60, 400 + 200 * i, 1020, 560 + 200 * i) for i in range(6)]

SCREENS = [
    screen("home", [
        title("Home"),
        el("app_notes", "icon", "Notes", (80, 300, 280, 500)),
        el("app_settings", "icon", "Settings", (320, 300, 520, 500)),
        el("app_news", "icon", "News", (560, 300, 760, 500)),
        el("app_shop", "icon", "Shop", (800, 300, 1000, 500)),
        el("app_clock", "icon", "Clock", (80, 600, 280, 800)),
    ], [
        tap("app_notes", "notes_home"),
        tap("app_settings", "settings_home"),
        tap("app_news", "news_home"),
        tap("app_shop", "shop_home"),
        tap("app_clock", "clock_home"),
    ]),
    app_screen("notes_home", [
        title("Notes"),
        el("new_note", "icon", "New note", (860, 2100, 1020, 2260)),
    ], [tap("new_note", "notes_editor")], back_to="home"),
    app_screen("notes_editor", [
        title("New note"),
        el("save", "text", "Save", (860, 120, 1060, 220)),
        el("body", "text", "Note text", (60, 300, 1020, 1300)),
    ], [tap("save", "notes_view", effects={"note": "$text"})],
        back_to="notes_home", keyboard_visible=True),
    # edge back is swallowed here; only the on-screen back icon navigates
    app_screen("notes_view", [
        title("Note"),
        back_icon(),
    ], [tap("back", "notes_home")], supports_edge_back_gesture=False),
    app_screen("settings_home", [
        title("Settings"),
        el("display", "text", "Display", ROW[0]),
        el("about", "text", "About phone", ROW[1]),
    ], [tap("display", "settings_display"), tap("about", "settings_about")], back_to="home"),
    app_screen("settings_display", [
        title("Display"),
        el("dark_mode", "text", "Dark mode", ROW[0]),
    ], [
        tap("dark_mode", "settings_display", guard={"dark_mode": "off"}, effects={"dark_mode": "on"}),
        tap("dark_mode", "settings_display", guard={"dark_mode": "on"}, effects={"dark_mode": "off"}),
    ], back_to="settings_home"),
    # neither an edge-back gesture nor a back affordance
    app_screen("settings_about", [
        title("About phone"),
        el("version", "text", "Version 14", ROW[0]),
    ], [], supports_edge_back_gesture=False),
    app_screen("news_home", [
        title("Top stories"),
        el("search", "icon", "Search", (900, 110, 1040, 230)),
        el("weather", "text", "Local weather", ROW[0]),
        el("markets", "text", "Markets rally", ROW[1]),
    ], [
        tap("search", "news_search"),
        tap("weather", "news_article"),
        gesture("swipe", "news_home_more", direction="up"),
    ], back_to="home"),
    app_screen("news_home_more", [
        title("More stories"),
        el("science", "text", "Science today", ROW[0]),
    ], [
        tap("science", "news_science"),
        gesture("swipe", "news_home", direction="down"),
    ], back_to="news_home"),
    app_screen("news_article", [
        title("Local weather"),
        el("save", "icon", "Save", (880, 2100, 1040, 2260)),
    ], [tap("save", "news_article", effects={"saved": "weather"})], back_to="news_home"),
    app_screen("news_science", [
        title("Science today"),
        el("save", "icon", "Save", (880, 2100, 1040, 2260)),
    ], [tap("save", "news_science", effects={"saved": "science"})], back_to="news_home_more"),
    app_screen("news_search", [
        title("Search"),
        el("query", "text", "Search news", (60, 300, 1020, 420)),
    ], [{"trigger": {"type": "text_commit"}, "target": "news_results",
         "effects": {"query": "$text"}}],
        back_to="news_home", keyboard_visible=True),
    app_screen("news_results", [
        title("Results"),
        el("result", "text", "Result 1", ROW[0]),
    ], [tap("result", "news_article")], back_to="news_search"),
    app_screen("shop_home", [
        title("Shop"),
        el("shoes", "text", "Running shoes", ROW[0]),
        el("bag", "text", "Backpack", ROW[1]),
    ], [tap("shoes", "shop_item")], back_to="home"),
    app_screen("shop_item", [
        title("Running shoes"),
        el("add", "text", "Add to cart", (60, 2100, 1020, 2260)),
    ], [tap("add", "shop_item", guard={"cart": 0}, effects={"cart": 1})], back_to="shop_home"),
    app_screen("clock_home", [
        title("Clock"),
        el("timer", "text", "Timer", ROW[0]),
        el("alarm", "text", "Alarm", ROW[1]),
    ], [tap("timer", "clock_timer")], back_to="home"),
    app_screen("clock_timer", [
        title("Timer"),
        el("start", "icon", "Start", (440, 1800, 640, 2000)),
    ], [tap("start", "clock_timer", guard={"timer": "stopped"}, effects={"timer": "running"})],
        back_to="clock_home"),
]

SCREEN_PACK = {
    "pack_version": 1,
    "name": "synthetic-phone",
    "screen": {"width": W, "height": H},
    "home": "home",
    "apps": {"notes": "notes_home", "settings": "settings_home", "news": "news_home",
             "shop": "shop_home", "clock": "clock_home"},
    "variables": {"dark_mode": "off", "note": "", "saved": "", "query": "", "cart": 0,
                  "timer": "stopped"},
    "keyboard": KEYBOARD,
    "screens": SCREENS,
}


def center(screen_id, element_id):
    for s in SCREENS:
        if s["screen_id"] == screen_id:
            for e in s["elements"]:
                if e["id"] == element_id:
                    x0, y0, x1, y1 = e["bbox"]
                    return (x0 + x1) // 2, (y0 + y1) // 2
    raise KeyError((screen_id, element_id))


def T(screen_id, element_id, description=None):
    x, y = center(screen_id, element_id)
    step = {"type": "tap", "params": {"x": x, "y": y}}
    if description:
        step["description"] = description
    return step


def RET():
    return {"type": "tap", "params": {"x": RETURN_KEY[0], "y": RETURN_KEY[1]},
            "description": "tap text (return)"}


def TXT(text):
    return {"type": "text", "params": {"text": text}}


def SW(screen_id, direction, distance):
    x, y = W // 2, 1400
    return {"type": "swipe", "params": {"x": x, "y": y, "direction": direction, "distance": distance}}


BACK = {"type": "back", "params": {}}
EXIT = {"type": "exit", "params": {}}


def task(task_id, set_, category, level, apps, instruction, golden):
    return {
        "task_id": task_id,
        "set": set_,
        "category": category,
        "level": level,
        "apps": apps,
        "origin": "phone_home" if set_ == "cross_app" else "app_home",
        "instruction": instruction,
        "golden_steps": len(golden),
        "golden_trajectory": golden,
    }


TASKS = [
    task("settings-dark-mode", "standard", "SystemApps", "simple", ["settings"],
         "Turn on dark mode.",
         [T("settings_home", "display", "open Display"), T("settings_display", "dark_mode")]),
    task("shop-add-shoes", "standard", "Shop&Fin", "simple", ["shop"],
         "Add the running shoes to the cart.",
         [T("shop_home", "shoes"), T("shop_item", "add")]),
    task("clock-start-timer", "standard", "Lifestyle", "simple", ["clock"],
         "Start the timer.",
         [T("clock_home", "timer"), T("clock_timer", "start")]),
    task("news-save-science", "standard", "News&Reading", "medium", ["news"],
         "Save the science article from the second page of stories.",
         [SW("news_home", "up", "medium"), T("news_home_more", "science"), T("news_science", "save")]),
    task("notes-write-hi", "challenging", "Prod&Tools", "medium", ["notes"],
         "Create a note that says 'Hi 2'.",
         [T("notes_home", "new_note"), TXT("Hi 2"), T("notes_editor", "save")]),
    task("news-search-mars", "challenging", "News&Reading", "medium", ["news"],
         "Search the news for mars.",
         [T("news_home", "search"), TXT("mars"), RET()]),
    task("notes-back-from-view", "challenging", "Prod&Tools", "hard", ["notes"],
         "Write a note saying ok, then return to the notes list.",
         [T("notes_home", "new_note"), TXT("ok"), T("notes_editor", "save"), BACK]),
    task("settings-about-exit", "challenging", "SystemApps", "simple", ["settings"],
         "Look at the phone version, then leave the app.",
         [T("settings_home", "about"), EXIT]),
    task("news-weather-back", "challenging", "News&Reading", "hard", ["news"],
         "Save the weather article, go back and scroll to more stories.",
         [T("news_home", "weather"), T("news_article", "save"), BACK, SW("news_home", "up", "medium")]),
    task("cross-news-then-shop", "cross_app", "Web Shopping", None, ["news", "shop"],
         "Search the news for deals, then add running shoes to the shop cart.",
         [T("home", "app_news"), T("news_home", "search"), TXT("deals"), RET(), EXIT,
          T("home", "app_shop"), T("shop_home", "shoes"), T("shop_item", "add")]),
    task("cross-timer-note", "cross_app", "Information Management", None, ["clock", "notes"],
         "Start a timer and write a note saying timer on.",
         [T("home", "app_clock"), T("clock_home", "timer"), T("clock_timer", "start"), EXIT,
          T("home", "app_notes"), T("notes_home", "new_note"), TXT("timer on"),
          T("notes_editor", "save")]),
    task("cross-dark-weather", "cross_app", "General Tool", None, ["settings", "news"],
         "Turn on dark mode, then save the local weather article.",
         [T("home", "app_settings"), T("settings_home", "display"), T("settings_display", "dark_mode"),
          EXIT, T("home", "app_news"), T("news_home", "weather"), T("news_article", "save")]),
]

TASK_PACK = {
    "task_pack_version": 1,
    "screen_pack": "screens.json",
    "device_profile": "device_profile.json",
    "tasks": TASKS,
}

# Arm workspace in mm: 0.07 mm/px with a slight skew and an offset.
AFFINE = [[0.07, 0.001, 20.0], [-0.0005, 0.07, 15.0]]


def to_workspace(px, py):
    (a, b, c), (d, e, f) = AFFINE
    return [round(a * px + b * py + c, 6), round(d * px + e * py + f, 6)]


POINTS = [(0, 0), (1079, 0), (0, 2399), (1079, 2399), (540, 1200)]

PROFILE = {
    "profile_version": 1,
    "device_id": "synthetic-1080x2400",
    "screen": {"width": W, "height": H},
    "workspace": {"x_min": 0.0, "y_min": 0.0, "x_max": 120.0, "y_max": 200.0},
    "z_contact": 0.0,
    "z_hover": 5.0,
    "correspondences": [{"pixel": list(p), "workspace": to_workspace(*p)} for p in POINTS],
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for name, doc in (("screens.json", SCREEN_PACK), ("tasks.json", TASK_PACK),
                      ("device_profile.json", PROFILE)):
        (DATA / name).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        print(DATA / name)


if __name__ == "__main__":
    main()
