from .cli import build_parser, load_config_file, main, parse_args
