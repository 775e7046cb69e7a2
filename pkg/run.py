#!/usr/bin/env python3
from polarspike.cli import run

if __name__ == "__main__":
    run()
