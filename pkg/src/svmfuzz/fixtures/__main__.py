from svmfuzz.fixtures import DATA_DIR, write_all

write_all()
print(f"fixtures written to {DATA_DIR}")
